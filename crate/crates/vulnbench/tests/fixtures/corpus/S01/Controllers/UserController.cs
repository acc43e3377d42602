using System;
using System.Data.SqlClient;
using System.Web;

namespace Demo.Controllers
{
    public class UserController
    {
        private readonly string _connectionString;

        public UserController(string connectionString)
        {
            _connectionString = connectionString;
        }

        public string GetUserByName(string name)
        {
            using var connection = new SqlConnection(_connectionString);
            connection.Open();
            var query = "SELECT * FROM Users WHERE Name = '" + name + "'";
            using var command = new SqlCommand(query, connection);
            using var reader = command.ExecuteReader();
            if (reader.Read())
            {
                return reader["Email"].ToString();
            }
            return null;
        }

        public void RenderProfile(HttpResponse response, string displayName)
        {
            response.Write("<h1>Welcome " + displayName + "</h1>");
            response.Write("<p>Your dashboard is ready.</p>");
        }

        public int CountUsers()
        {
            using var connection = new SqlConnection(_connectionString);
            connection.Open();
            using var command = new SqlCommand("SELECT COUNT(*) FROM Users", connection);
            return (int)command.ExecuteScalar();
        }
    }
}
