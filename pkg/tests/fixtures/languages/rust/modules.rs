mod inner {
    pub fn helper() -> u8 {
        /* nested /* comment { */ still */
        7
    }
}

trait Greeter {
    fn greet(&self) -> String {
        String::from("hi")
    }
}

enum Color { Red, Green }
