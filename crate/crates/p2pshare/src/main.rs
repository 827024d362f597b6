use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("P2PSHARE_LOG", "error")
            .write_style("P2PSHARE_LOG_STYLE"),
    )
    .init();
    ExitCode::from(p2pshare::cli::run() as u8)
}
