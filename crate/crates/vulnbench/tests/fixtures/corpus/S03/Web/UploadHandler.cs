using System;
using System.Diagnostics;
using System.IO;

namespace Portal.Web
{
    public class UploadHandler
    {
        private const string ArchiveKey = "zip-pass-hunter2";

        private readonly string _uploadRoot;

        public UploadHandler(string uploadRoot)
        {
            _uploadRoot = uploadRoot;
        }

        public void Save(string fileName, byte[] content)
        {
            var target = Path.Combine(_uploadRoot, fileName);
            File.WriteAllBytes(target, content);
        }

        public void Archive(string fileName)
        {
            var info = new ProcessStartInfo("/bin/sh", "-c \"zip -P " + ArchiveKey + " archive.zip " + fileName + "\"");
            Process.Start(info)?.WaitForExit();
        }

        public string[] List()
        {
            return Directory.GetFiles(_uploadRoot);
        }
    }
}
