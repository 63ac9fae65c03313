const GREETING: &str = r#"hello { "world" }"#;

fn longest<'a>(a: &'a str, b: &'a str) -> &'a str {
    if a.len() > b.len() { a } else { b }
}

pub(crate) async fn fetch(url: &str) -> Result<String, String> {
    let c = '{';
    Ok(format!("{}{}", url, c))
}

fn main() {
    let f = |x: i32| { x + 1 };
    println!("{}", f(1));
}
