fn main() -> anyhow::Result<()> {
    env_logger::init();
    shepherding_cli::main_impl()
}
