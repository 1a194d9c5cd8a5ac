use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "loratb", version, about = "Discrete-event simulator for multi-radio LoRa testbeds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a periodic or aperiodic transmission schedule.
    GenSchedule(GenScheduleArgs),
    /// Run every seed of a scenario config and write traces and reports.
    Simulate(SimulateArgs),
    /// Compare analytic and simulated minimum transmission periods.
    MinPeriod(MinPeriodArgs),
    /// Compute metrics and plot data from run traces or gateway logs.
    Analyze(AnalyzeArgs),
    /// Memory, power and pin capacity of one master board.
    Capacity(CapacityArgs),
    /// Run a scenario under TDMA and CSMA and compare energy.
    CompareMac(CompareMacArgs),
}

#[derive(Debug, Args)]
pub struct GenScheduleArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub nodes: u32,
    #[arg(long, required_unless_present = "aperiodic", conflicts_with = "aperiodic")]
    pub period_ms: Option<u64>,
    /// Release offsets within the period, one per node. Default: staggered.
    #[arg(long, value_delimiter = ',', requires = "period_ms")]
    pub phases_ms: Option<Vec<u64>>,
    /// Spreading factor, one for all nodes or one per node.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub sf: Vec<u8>,
    /// Channel index, one for all nodes or one per node.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub ch: Vec<usize>,
    #[arg(long)]
    pub horizon_ms: u64,
    #[arg(long, requires = "events")]
    pub aperiodic: bool,
    #[arg(long, requires = "aperiodic")]
    pub events: Option<usize>,
    #[arg(long, default_value_t = 0, requires = "aperiodic")]
    pub seed: u64,
    /// Radios sharing one master's bus in the conflict check. Node `i` sits
    /// on master `i / radios_per_master`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub radios_per_master: u32,
    #[arg(long, default_value_t = loratb::engine::DEFAULT_PAYLOAD_LEN)]
    pub payload_len: usize,
    #[arg(long, default_value_t = loratb::engine::DEFAULT_BUS_OVERHEAD_MS)]
    pub bus_overhead_ms: f64,
    /// Fail when the schedule has bus or air conflicts.
    #[arg(long)]
    pub strict: bool,
    /// Output file. Default: stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Output directory. Default: the config's `output_dir`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MinPeriodArgs {
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub sf: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = clap::value_parser!(u32).range(1..))]
    pub radios: Vec<u32>,
    #[arg(long, default_value_t = loratb::engine::DEFAULT_PAYLOAD_LEN)]
    pub payload_len: usize,
    #[arg(long, default_value_t = loratb::engine::DEFAULT_BUS_OVERHEAD_MS)]
    pub bus_overhead_ms: f64,
    /// Periods simulated per probe.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub cycles: u64,
    /// Largest release-error drift a probe tolerates.
    #[arg(long, default_value_t = 1.0)]
    pub drift_tolerance_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Auto,
    Trace,
    Rxpk,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run traces (JSON lines) or rxpk gateway logs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short, default_value = "analysis")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    /// Report PRR and PLR counting only frames delivered by their deadline.
    #[arg(long)]
    pub with_deadlines: bool,
    /// Recompute every deadline as release plus this many ms.
    #[arg(long)]
    pub deadline_ms: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub jitter_bin_ms: f64,
    /// Treat four traces as the cells (varying SF, varying CH), (varying SF,
    /// same CH), (same SF, varying CH), (same SF, same CH).
    #[arg(long)]
    pub prr_matrix: bool,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, default_value_t = 13)]
    pub bytes_per_event: u64,
    #[arg(long, default_value_t = 1.0)]
    pub events_per_s: f64,
    #[arg(long, default_value_t = 10)]
    pub devices: u64,
    #[arg(long, default_value_t = 1.0)]
    pub days: f64,
    #[arg(long, default_value_t = 2.5)]
    pub supply_a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub board_a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub radio_tx_a: f64,
    #[arg(long, default_value_t = 1)]
    pub concurrent_tx: u32,
    #[arg(long, default_value_t = 28)]
    pub gpio_total: u32,
    #[arg(long, default_value_t = 4)]
    pub gpio_per_radio: u32,
    /// Count the SPI lines once per bus instead of per radio.
    #[arg(long)]
    pub gpio_shared_spi: bool,
}

#[derive(Debug, Args)]
pub struct CompareMacArgs {
    pub config: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Run the TDMA side without the config's background traffic.
    #[arg(long)]
    pub tdma_clear_channel: bool,
}
