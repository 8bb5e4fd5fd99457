fn main() {
    std::process::exit(compass_audit_cli::cli_main(std::env::args_os()));
}
