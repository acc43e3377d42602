using System;
using System.Diagnostics;
using System.IO;

namespace Demo.Controllers
{
    public class FileController
    {
        private readonly string _storageRoot;

        public FileController(string storageRoot)
        {
            _storageRoot = storageRoot;
        }

        public void ConvertDocument(string fileName)
        {
            var process = new Process();
            process.StartInfo.FileName = "/bin/sh";
            process.StartInfo.Arguments = "-c \"convert " + fileName + " output.pdf\"";
            process.Start();
            process.WaitForExit();
        }

        public byte[] Download(string relativePath)
        {
            var fullPath = Path.Combine(_storageRoot, relativePath);
            return File.ReadAllBytes(fullPath);
        }

        public void Cleanup()
        {
            foreach (var file in Directory.GetFiles(_storageRoot, "*.tmp"))
            {
                File.Delete(file);
            }
        }
    }
}
