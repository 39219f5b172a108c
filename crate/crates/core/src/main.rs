use std::io;

fn main() {
    let code = moran_carpet::app::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr());
    std::process::exit(code);
}
