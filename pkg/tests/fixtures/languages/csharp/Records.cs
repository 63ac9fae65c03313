#region models
public record Person(string First, string Last)
{
    public string Full() { return First + " " + Last; }
}
#endregion

public struct Vec
{
    public double X;
    public double Len() { return Math.Abs(X); }
}

public enum Mode { A, B }
