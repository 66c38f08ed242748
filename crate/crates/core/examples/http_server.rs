//! Serves the campaign API on a free port and drives one campaign through
//! it with raw HTTP/1.1 requests.

use std::io::{Read, Write};
use std::net::TcpStream;

use bayesopt::service::{router, Store};

fn request(port: u16, method: &str, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", port)).expect("connect");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .expect("write");
    let mut out = String::new();
    s.read_to_string(&mut out).expect("read");
    out.split("\r\n\r\n").nth(1).unwrap_or_default().to_string()
}

fn main() -> bayesopt::Result<()> {
    let store = Store::open(std::env::temp_dir().join("bayesopt-http-example"))?;
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let port = listener.local_addr()?.port();
    rt.spawn(async move { axum::serve(listener, router(store)).await });
    println!("serving on port {port}");

    let config = r#"{"bounds": {"lower": [-2], "upper": [2]}, "n0": 3, "budget": 8}"#;
    let created: serde_json::Value = serde_json::from_str(&request(port, "POST", "/campaigns", config)).expect("json");
    let id = created["id"].as_str().expect("id").to_string();
    for _ in 0..8 {
        let s: serde_json::Value =
            serde_json::from_str(&request(port, "GET", &format!("/campaigns/{id}/suggestion"), "")).expect("json");
        let x = s["x"][0].as_f64().expect("x");
        let y = -(x - 0.7f64).powi(2);
        println!("{:>9} x = {x:>8.4}  y = {y:>8.4}", s["phase"].as_str().unwrap_or(""));
        request(port, "POST", &format!("/campaigns/{id}/observations"), &format!(r#"{{"x": [{x}], "y": {y}}}"#));
    }
    println!("{}", request(port, "GET", &format!("/campaigns/{id}"), ""));
    request(port, "DELETE", &format!("/campaigns/{id}"), "");
    Ok(())
}
