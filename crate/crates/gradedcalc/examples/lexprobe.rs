fn main() {
    let mut lx = gradedcalc::lexer::Lexer::new("fn f : 2 = x*xi; // tail\n-> }");
    loop {
        match lx.next() {
            Ok(t) => {
                println!("{:?} at {}:{} off={} len={}", t.tok, t.span.line, t.span.col, t.offset, t.len);
                if t.tok == gradedcalc::lexer::Tok::Eof { break; }
            }
            Err(d) => { println!("ERR {d}"); break; }
        }
    }
}
