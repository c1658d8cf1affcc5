fn main() {
    std::process::exit(rss_sentry_cli::run(std::env::args_os()));
}
