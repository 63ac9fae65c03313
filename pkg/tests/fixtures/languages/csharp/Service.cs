using System.Data.SqlClient;

namespace App.Services;

public interface IService
{
    void Run();
}

public class Service : IService
{
    private readonly string path = @"C:\data\{x}";

    public void Run()
    {
        using (var conn = new SqlConnection("x"))
        {
            conn.Open();
        }
    }

    [Obsolete]
    public static int Twice(int x) => x * 2;
}
