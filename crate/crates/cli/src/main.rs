use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use freightledger::ledger::{to_canonical, verify_chain, Ledger, LedgerError, PayloadKind, Snapshot};
use freightledger::logistics::Milestone;
use freightledger::prediction::{
    stratified_split, train, AccuracyRegistry, Confusion, DwellModel, EvalResult, Hyperparams,
};
use freightledger::relay::{
    encode_message, export_view, read_message, verify_and_import, write_frame, write_message, RecordSelector,
    TrustAnchor,
};
use freightledger::sim::{
    build_dataset, compare_methods, default_target_port, generate_synthetic, run, Method, Scenario, SyntheticData,
    SyntheticSpec,
};

#[derive(Parser)]
#[command(name = "freightledger", version, about = "Accelerated carrier invoice factoring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario under one payment method.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// open-account, classic or accelerated; defaults to the scenario's own.
        #[arg(long)]
        method: Option<Method>,
        /// Print one line per workflow step.
        #[arg(long)]
        trace: bool,
        /// Write the ledgers as `logistics.flgr` and `finance.flgr` here.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all three payment methods and compare them.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a shipment's invoice as computed when a milestone occurred.
    Invoice {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        shipment: String,
        #[arg(long)]
        milestone: Milestone,
        /// Write the canonical ledger payload.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one dwell-threshold classifier on generated data.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lane: String,
        #[arg(long)]
        milestone: Milestone,
        /// Dwell hours the classifier separates (24, 48 or 72 for bucketing).
        #[arg(long, default_value_t = 24)]
        threshold: u32,
        /// Port whose dwell is predicted; defaults to the next transshipment port.
        #[arg(long)]
        port: Option<String>,
        #[arg(long, env = "FREIGHTLEDGER_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Record the held-out accuracy in this registry file (created if missing).
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Registry target name; defaults to `dwell>{threshold}h@{port}`.
        #[arg(long)]
        charge: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balanced accuracy of a model file on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic journeys with planted dwell behaviour.
    GenData {
        #[arg(long, value_enum, default_value_t = Preset::OneHop)]
        preset: Preset,
        /// A full generator spec (JSON); overrides --preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        shipments: usize,
        #[arg(long, env = "FREIGHTLEDGER_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One export / send / verify / import round over localhost TCP, plus a tampered copy.
    RelayDemo {
        #[arg(long)]
        scenario: PathBuf,
        /// Shipment whose latest invoice is sent; defaults to the first.
        #[arg(long)]
        shipment: Option<String>,
    },
    /// Rescan a ledger snapshot's hash chain.
    VerifyLedger {
        #[arg(long)]
        snapshot: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    OneHop,
    TwoHop,
}

type Res<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Res<()> {
    match cmd {
        Command::Simulate { scenario, method, trace, snapshots, out } => simulate(&scenario, method, trace, snapshots, out),
        Command::Compare { scenario, out } => {
            let c = compare_methods(&load(&scenario)?).map_err(err)?;
            println!("{c}");
            write_opt(out, c.to_json().as_bytes())
        }
        Command::Invoice { scenario, shipment, milestone, out } => invoice(&scenario, &shipment, &milestone, out),
        Command::Train {
            data,
            lane,
            milestone,
            threshold,
            port,
            seed,
            hidden,
            epochs,
            learning_rate,
            test_fraction,
            registry,
            charge,
            out,
        } => {
            let hp = Hyperparams { hidden_dim: hidden, epochs, learning_rate, ..Hyperparams::default() };
            let job = TrainJob { lane, milestone, threshold, port, seed, hp, test_fraction };
            train_cmd(&data, job, registry, charge, &out)
        }
        Command::Eval { model, data, out } => eval(&model, &data, out),
        Command::GenData { preset, spec, shipments, seed, out } => gen_data(preset, spec, shipments, seed, &out),
        Command::RelayDemo { scenario, shipment } => relay_demo(&scenario, shipment),
        Command::VerifyLedger { snapshot } => verify_ledger(&snapshot),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn load(path: &Path) -> Res<Scenario> {
    Scenario::from_path(path).map_err(err)
}

fn read(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Res<()> {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_opt(path: Option<PathBuf>, bytes: &[u8]) -> Res<()> {
    match path {
        Some(p) => write(&p, bytes),
        None => Ok(()),
    }
}

fn simulate(path: &Path, method: Option<Method>, trace: bool, snapshots: Option<PathBuf>, out: Option<PathBuf>) -> Res<()> {
    let mut s = load(path)?;
    if let Some(m) = method {
        s.method = m;
    }
    let o = run(&s).map_err(err)?;
    if trace {
        for line in &o.trace {
            println!("{line}");
        }
        println!();
    }
    println!("{}", o.report);
    if let Some(dir) = snapshots {
        std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        write(&dir.join("logistics.flgr"), &o.logistics.snapshot().encode())?;
        write(&dir.join("finance.flgr"), &o.finance.snapshot().encode())?;
    }
    write_opt(out, o.report.to_json().as_bytes())
}

fn invoice(path: &Path, shipment: &str, milestone: &Milestone, out: Option<PathBuf>) -> Res<()> {
    let s = load(path)?;
    if s.shipment(shipment).is_none() {
        return Err(format!("unknown shipment {shipment}"));
    }
    let o = run(&s).map_err(err)?;
    let inv = o
        .invoices
        .iter()
        .rev()
        .find(|i| i.shipment_id == shipment && &i.trigger_milestone == milestone)
        .ok_or_else(|| format!("{shipment}: no invoice at {milestone} (milestone did not actually occur)"))?;
    println!("{inv}");
    write_opt(out, &to_canonical(inv).map_err(err)?)
}

struct TrainJob {
    lane: String,
    milestone: Milestone,
    threshold: u32,
    port: Option<String>,
    seed: u64,
    hp: Hyperparams,
    test_fraction: f64,
}

fn load_data(path: &Path) -> Res<SyntheticData> {
    serde_json::from_slice(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn train_cmd(data: &Path, job: TrainJob, registry: Option<PathBuf>, charge: Option<String>, out: &Path) -> Res<()> {
    let data = load_data(data)?;
    let lane = &data.spec.lane;
    if lane.lane_id != job.lane {
        return Err(format!("data is for lane {}, not {}", lane.lane_id, job.lane));
    }
    if !(0.0..1.0).contains(&job.test_fraction) {
        return Err("--test-fraction must be in [0, 1)".into());
    }
    let port = match job.port {
        Some(p) => p,
        None => default_target_port(lane, &job.milestone)
            .ok_or_else(|| format!("no transshipment port follows {}; pass --port", job.milestone))?,
    };
    let ds = build_dataset(&data, &job.milestone, &port, job.threshold).map_err(err)?;
    let labels: Vec<bool> = ds.iter().map(|(_, y)| *y).collect();
    let (train_idx, test_idx) = stratified_split(&labels, job.test_fraction, job.seed);
    let train_set: Vec<_> = train_idx.iter().map(|&i| ds[i].clone()).collect();
    let mut model = train(&train_set, job.threshold, &job.hp, job.seed).map_err(err)?;
    model.lane_id = lane.lane_id.clone();
    model.milestone = Some(job.milestone.clone());
    model.port = Some(port.clone());

    let curve = &model.training.loss_curve;
    println!(
        "trained dwell>{}h at {port} on {} at {}: {} samples, loss {:.4} -> {:.4}",
        job.threshold,
        lane.lane_id,
        job.milestone,
        train_set.len(),
        curve.first().copied().unwrap_or(f64::NAN),
        curve.last().copied().unwrap_or(f64::NAN)
    );
    let eval = if test_idx.is_empty() {
        None
    } else {
        let test: Vec<_> = test_idx.iter().map(|&i| ds[i].clone()).collect();
        let (c, ba) = evaluate(&model, &test)?;
        println!("held-out: {} samples, balanced accuracy {ba:.4} (tp {} fn {} tn {} fp {})", c.total(), c.tp, c.fn_, c.tn, c.fp);
        Some(EvalResult { balanced_accuracy: ba, sample_count: c.total() })
    };
    write(out, &model.to_bytes())?;
    if let (Some(path), Some(eval)) = (registry, eval) {
        let mut reg = if path.exists() {
            serde_json::from_slice::<AccuracyRegistry>(&read(&path)?).map_err(|e| format!("{}: {e}", path.display()))?
        } else {
            AccuracyRegistry::new()
        };
        let target = charge.unwrap_or_else(|| format!("dwell>{}h@{port}", job.threshold));
        reg.update(&lane.lane_id, &job.milestone, &target, eval);
        let text = serde_json::to_string_pretty(&reg).map_err(err)? + "\n";
        write(&path, text.as_bytes())?;
    }
    Ok(())
}

fn evaluate(model: &DwellModel, set: &[(Vec<Vec<f64>>, bool)]) -> Res<(Confusion, f64)> {
    let mut preds = Vec::with_capacity(set.len());
    for (xs, _) in set {
        preds.push(model.classify(xs).map_err(err)?);
    }
    let labels: Vec<bool> = set.iter().map(|(_, y)| *y).collect();
    let c = Confusion::tally(&preds, &labels).map_err(err)?;
    let ba = c.balanced_accuracy().map_err(err)?;
    Ok((c, ba))
}

fn eval(model: &Path, data: &Path, out: Option<PathBuf>) -> Res<()> {
    let model = DwellModel::from_bytes(&read(model)?).map_err(err)?;
    let data = load_data(data)?;
    let (Some(m), Some(port)) = (&model.milestone, &model.port) else {
        return Err("model file does not say which milestone and port it was trained for".into());
    };
    if !model.lane_id.is_empty() && model.lane_id != data.spec.lane.lane_id {
        return Err(format!("model is for lane {}, data for {}", model.lane_id, data.spec.lane.lane_id));
    }
    let ds = build_dataset(&data, m, port, model.threshold_hours).map_err(err)?;
    let (c, ba) = evaluate(&model, &ds)?;
    println!(
        "dwell>{}h at {port} on {} at {m}: {} samples, balanced accuracy {ba:.4} (tp {} fn {} tn {} fp {})",
        model.threshold_hours,
        data.spec.lane.lane_id,
        c.total(),
        c.tp,
        c.fn_,
        c.tn,
        c.fp
    );
    let r = EvalResult { balanced_accuracy: ba, sample_count: c.total() };
    write_opt(out, (serde_json::to_string_pretty(&r).map_err(err)? + "\n").as_bytes())
}

fn gen_data(preset: Preset, spec: Option<PathBuf>, shipments: usize, seed: u64, out: &Path) -> Res<()> {
    let spec = match spec {
        Some(p) => serde_json::from_slice::<SyntheticSpec>(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => match preset {
            Preset::OneHop => SyntheticSpec::one_hop(shipments, seed),
            Preset::TwoHop => SyntheticSpec::two_hop(shipments, seed),
        },
    };
    let data = generate_synthetic(&spec).map_err(err)?;
    let events: usize = data.shipments.iter().map(|s| s.events.len()).sum();
    println!("{} shipments on {}, {events} events, seed {}", data.shipments.len(), spec.lane.lane_id, spec.seed);
    for p in &spec.ports {
        let long = data.shipments.iter().filter(|s| s.dwell_hours[&p.port] > 24).count();
        println!("  {}: {long} of {} dwell over 24h", p.port, data.shipments.len());
    }
    let text = serde_json::to_string(&data).map_err(err)? + "\n";
    write(out, text.as_bytes())
}

fn relay_demo(path: &Path, shipment: Option<String>) -> Res<()> {
    let s = load(path)?;
    let shipment = match shipment {
        Some(id) => id,
        None => s.shipment_ids().next().ok_or("scenario has no shipments")?.to_string(),
    };
    let o = run(&s).map_err(err)?;
    let ring = s.anchors.logistics.keyring().map_err(err)?;
    let attested = export_view(&o.logistics, &ring, &RecordSelector::LatestInvoice { shipment_id: shipment.clone() })
        .map_err(err)?;
    println!(
        "exporting {} payload {} ({} bytes) from {}, signed by {}",
        attested.payload_kind,
        attested.payload_hash,
        attested.payload_bytes.len(),
        attested.source_network_id,
        attested.signatures.iter().map(|a| a.member_id.as_str()).collect::<Vec<_>>().join(", ")
    );
    let mut tampered = attested.clone();
    let last = tampered.payload_bytes.len() - 2;
    tampered.payload_bytes[last] ^= 0x01;

    let mut anchors = TrustAnchor::new();
    anchors.trust(ring.identity());
    let finance_ring = s.anchors.finance.keyring().map_err(err)?;
    let mut finance = Ledger::new(finance_ring.identity().clone());

    let listener = TcpListener::bind("127.0.0.1:0").map_err(err)?;
    let addr = listener.local_addr().map_err(err)?;
    println!("listening on {addr}");
    let outcomes: Vec<Result<u64, String>> = std::thread::scope(|scope| {
        let receiver = scope.spawn(|| -> Res<Vec<Result<u64, String>>> {
            let (conn, _) = listener.accept().map_err(err)?;
            let mut results = Vec::new();
            for _ in 0..3 {
                let r = read_message(&conn)
                    .and_then(|m| verify_and_import(&mut finance, &m, &anchors))
                    .map(|rec| rec.sequence_no)
                    .map_err(err);
                results.push(r);
            }
            Ok(results)
        });
        let send = || -> Res<()> {
            let conn = TcpStream::connect(addr).map_err(err)?;
            write_message(&conn, &attested).map_err(err)?;
            write_frame(&conn, &encode_message(&tampered)[4..]).map_err(err)?;
            write_message(&conn, &attested).map_err(err)
        };
        let sent = send();
        let got = receiver.join().expect("receiver thread");
        sent.and(got)
    })?;

    let label = ["original", "tampered (one bit flipped)", "original again"];
    for (l, r) in label.iter().zip(&outcomes) {
        match r {
            Ok(seq) => println!("  {l:<28} accepted as finance record {seq}"),
            Err(e) => println!("  {l:<28} rejected: {e}"),
        }
    }
    let ok = matches!(outcomes.as_slice(), [Ok(a), Err(_), Ok(b)] if a == b);
    println!("finance ledger: {} record(s), state {}", finance.len(), finance.state_hash());
    if ok {
        println!("relay round ok: valid payload imported once, tampered copy rejected");
        Ok(())
    } else {
        Err("relay round did not behave as expected".into())
    }
}

fn verify_ledger(path: &Path) -> Res<()> {
    let snap = Snapshot::decode(&read(path)?).map_err(err)?;
    match verify_chain(&snap.records) {
        Ok(()) => {
            let head = snap.records.last().map_or("empty".to_string(), |r| r.record_hash.to_hex());
            println!("{}: {} records on {}, chain intact, head {head}", path.display(), snap.records.len(), snap.network_id);
            let kinds = PayloadKind::ALL
                .iter()
                .map(|k| (k, snap.records.iter().filter(|r| r.payload_kind == *k).count()))
                .filter(|(_, n)| *n > 0)
                .map(|(k, n)| format!("{k} {n}"))
                .collect::<Vec<_>>();
            println!("  {}", kinds.join(", "));
            Ok(())
        }
        Err(LedgerError::Chain { sequence_no, reason }) => {
            Err(format!("{}: chain broken at sequence_no {sequence_no}: {reason}", path.display()))
        }
        Err(e) => Err(e.to_string()),
    }
}
