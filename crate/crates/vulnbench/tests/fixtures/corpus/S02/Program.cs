using System;

namespace Inventory
{
    public static class Program
    {
        public static void Main(string[] args)
        {
            var db = new Db("Server=localhost;Database=inventory;User Id=app;Password=inv3ntory!;");
            if (args.Length > 0)
            {
                var row = db.FindItem(args[0]);
                Console.WriteLine(row ?? "not found");
            }
            else
            {
                Console.WriteLine($"{db.CountItems()} items in stock");
            }
        }
    }
}
