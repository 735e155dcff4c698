use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::PathBuf;

use clap::Parser;
use surge_core::cellindex::BoundMode;
use surge_core::model::{Query, Rect};

use surge_cli::emit::{EmitMode, Emitter};
use surge_cli::gen::{generate, write_stream, GenConfig};
use surge_cli::run::{replay, Algo, RunError};
use surge_cli::stream::{ParseError, StreamReader};

/// Continuous bursty-region detection over a stream of spatial objects.
///
/// Reads `t,x,y,w` lines (or JSON objects with those keys) in timestamp
/// order and emits one JSON line per detection with the current top-k
/// regions. Also generates synthetic workloads (--gen) and benchmarks the
/// algorithms against each other (--bench).
#[derive(Parser, Debug)]
#[command(name = "surge", version)]
struct Cli {
    /// Input stream file; '-' or absent reads stdin.
    stream: Option<PathBuf>,

    /// Algorithm: ccs, gaps, mgaps, kccs, kgaps, kmgaps, oracle, naive.
    /// With --bench, a comma-separated list.
    #[arg(long, default_value = "ccs")]
    algo: String,

    /// Region width (b).
    #[arg(long)]
    width: Option<f64>,

    /// Region height (a).
    #[arg(long)]
    height: Option<f64>,

    /// Window length in seconds (current and past windows).
    #[arg(long)]
    window: Option<f64>,

    /// Burstiness/significance balance in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Number of regions to report.
    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Preferred area as x0,y0,x1,y1; default is the whole plane.
    #[arg(long)]
    area: Option<String>,

    /// Emission cadence: per-event, or interval:<seconds>.
    #[arg(long, default_value = "per-event")]
    emit: String,

    /// Upper bounds used by ccs: both, static, none.
    #[arg(long = "bound-mode", default_value = "both")]
    bound_mode: String,

    /// Generate a synthetic stream from this JSON config instead of
    /// detecting; writes records to --out or stdout.
    #[arg(long)]
    gen: Option<PathBuf>,

    /// Benchmark the listed algorithms on the stream and print a table;
    /// --out receives the JSON report.
    #[arg(long)]
    bench: bool,

    /// In bench mode, exclude events before the first expiry from the
    /// timing statistics (measure the stable regime only).
    #[arg(long)]
    warmup: bool,

    /// Seed override for --gen.
    #[arg(long)]
    seed: Option<u64>,

    /// Keep reading as the input file grows (tail mode).
    #[arg(long)]
    follow: bool,

    /// Output file; default stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("surge: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), RunError> {
    if let Some(cfg_path) = &cli.gen {
        return run_gen(cli, cfg_path);
    }
    if cli.bench {
        return run_bench_mode(cli);
    }
    run_detect(cli)
}

fn out_writer(cli: &Cli) -> Result<Box<dyn Write>, RunError> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn parse_query(cli: &Cli) -> Result<Query, RunError> {
    let missing = |name: &str| RunError::Input(format!("--{name} is required for detection"));
    let width = cli.width.ok_or_else(|| missing("width"))?;
    let height = cli.height.ok_or_else(|| missing("height"))?;
    let window = cli.window.ok_or_else(|| missing("window"))?;
    let mut q = Query::new(width, height, window).with_alpha(cli.alpha).with_k(cli.k);
    if let Some(area) = &cli.area {
        let parts: Vec<f64> = area
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Input(format!("bad --area: {e}")))?;
        if parts.len() != 4 {
            return Err(RunError::Input("--area needs x0,y0,x1,y1".into()));
        }
        q = q.with_area(Rect::new(parts[0], parts[1], parts[2], parts[3]));
    }
    q.validate()?;
    Ok(q)
}

fn parse_bound_mode(s: &str) -> Result<BoundMode, RunError> {
    match s {
        "both" => Ok(BoundMode::Both),
        "static" => Ok(BoundMode::StaticOnly),
        "none" => Ok(BoundMode::None),
        _ => Err(RunError::Input(format!("unknown bound mode {s:?}"))),
    }
}

fn run_gen(cli: &Cli, cfg_path: &PathBuf) -> Result<(), RunError> {
    let text = std::fs::read_to_string(cfg_path)?;
    let mut cfg: GenConfig = serde_json::from_str(&text)
        .map_err(|e| RunError::Input(format!("bad generator config: {e}")))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let records = generate(&cfg)?;
    let mut out = out_writer(cli)?;
    write_stream(&records, &mut out)?;
    Ok(())
}

fn open_stream(cli: &Cli) -> Result<Box<dyn BufRead>, RunError> {
    Ok(match &cli.stream {
        Some(p) if p.as_os_str() != "-" => Box::new(BufReader::new(File::open(p)?)),
        _ => Box::new(BufReader::new(std::io::stdin().lock())),
    })
}

fn run_bench_mode(cli: &Cli) -> Result<(), RunError> {
    let q = parse_query(cli)?;
    let bound_mode = parse_bound_mode(&cli.bound_mode)?;
    let algos: Vec<Algo> = cli
        .algo
        .split(',')
        .map(|s| Algo::parse(s.trim()))
        .collect::<Result<_, _>>()?;
    let objects = surge_cli::stream::read_all(open_stream(cli)?)?;
    let report = surge_cli::bench::run_bench(&objects, &q, &algos, bound_mode, cli.warmup)?;
    print!("{}", surge_cli::bench::human_table(&report));
    if cli.out.is_some() {
        let mut out = out_writer(cli)?;
        serde_json::to_writer(&mut out, &report)
            .map_err(|e| RunError::Input(format!("report serialization: {e}")))?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}

fn run_detect(cli: &Cli) -> Result<(), RunError> {
    let q = parse_query(cli)?;
    let algo = Algo::parse(&cli.algo)?;
    let bound_mode = parse_bound_mode(&cli.bound_mode)?;
    let mode: EmitMode = cli.emit.parse().map_err(RunError::Input)?;
    let mut detector = algo.build(&q, bound_mode)?;
    let mut emitter = Emitter::new(mode, algo.name(), out_writer(cli)?);

    if cli.follow {
        return follow_loop(cli, &q, detector.as_mut(), &mut emitter);
    }
    let reader = StreamReader::new(open_stream(cli)?);
    replay(reader, &q, detector.as_mut(), &mut emitter)?;
    Ok(())
}

/// Tail mode: keep polling the file for appended records, using record
/// timestamps as logical time. Runs until the process is stopped.
fn follow_loop<W: Write>(
    cli: &Cli,
    q: &Query,
    detector: &mut dyn surge_core::detector::Detector,
    emitter: &mut Emitter<W>,
) -> Result<(), RunError> {
    let path = cli
        .stream
        .as_ref()
        .filter(|p| p.as_os_str() != "-")
        .ok_or_else(|| RunError::Input("--follow needs a file path".into()))?;
    let mut sched = surge_core::window::EventScheduler::new(q.clone())?;
    let mut pos = 0u64;
    let mut pending = String::new();
    let mut line_no = 0usize;
    let mut next_id = 0u64;
    loop {
        let mut f = File::open(path)?;
        f.seek(SeekFrom::Start(pos))?;
        let mut chunk = String::new();
        f.read_to_string(&mut chunk)?;
        pos += chunk.len() as u64;
        pending.push_str(&chunk);
        while let Some(nl) = pending.find('\n') {
            let line: String = pending.drain(..=nl).collect();
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec = surge_cli::stream::parse_record(&line)
                .map_err(|msg| ParseError::Malformed { line: line_no, msg })?;
            let obj = surge_core::model::SpatialObject {
                id: next_id,
                w: rec.w,
                x: rec.x,
                y: rec.y,
                t_c: rec.t,
            };
            next_id += 1;
            for e in sched.advance(obj.t_c) {
                emitter.observe(e.due, detector.on_event(&e)?)?;
            }
            for e in sched.admit(&obj)? {
                emitter.observe(e.due, detector.on_event(&e)?)?;
            }
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
}
