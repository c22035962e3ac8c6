use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::default().filter_or("SPAS_LOG", "warn")).init();
    std::process::exit(spas_core::cli::run(std::env::args_os()));
}
