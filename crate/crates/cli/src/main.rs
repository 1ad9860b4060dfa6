//! `padic-diaglin` binary: runs one request and exits with its status code.

fn main() {
    let code = padic_diaglin_cli::run(std::env::args_os());
    std::process::exit(code);
}
