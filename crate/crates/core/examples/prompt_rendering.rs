//! Renders every built-in connection-analysis prompt for one pair.

use lemp::providers::PromptTemplate;
use lemp::providers::synthetic::approx_tokens;

fn main() -> lemp::Result<()> {
    let a = "Course page for an introductory operating systems class";
    let b = "Homepage of a faculty member working on distributed systems";
    for t in PromptTemplate::builtin() {
        let p = t.render(a, b)?;
        println!("== {} ({} tokens approx)\n{p}\n", t.id, approx_tokens(&p));
    }
    match PromptTemplate::by_id("webpage")?.render("", b) {
        Err(e) => println!("empty text: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
