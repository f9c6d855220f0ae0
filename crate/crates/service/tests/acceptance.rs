//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use cropchain_core::dataset::{
    load_dataset, stratified_split, LabeledSample, MinMaxScaler, SplitSpec,
};
use cropchain_core::models::{
    benchmark_suite, fit, fit_with_scaler, save_model, Algorithm, ClassifierSpec,
};
use cropchain_core::rng::SeededRng;
use cropchain_core::telemetry::{SimConfig, SimMode, Simulator};
use cropchain_core::{Dataset, SensorReading};
use cropchain_ledger::{
    decode_add_prediction, encode_add_prediction, read_chain, write_chain, Address, Chain,
    ChainConfig, PredictionRecord,
};
use cropchain_service::api::PredictionView;
use cropchain_service::config::ServiceConfig;
use cropchain_service::simulate::run_simulation;
use cropchain_service::{http, Service};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn data_path() -> PathBuf {
    std::env::var_os("CROPCHAIN_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/crop_surrogate.csv")
        })
}

fn dataset() -> Dataset {
    load_dataset(data_path()).expect("dataset loads")
}

fn benchmark() -> Outcome {
    let data = dataset();
    let specs: Vec<ClassifierSpec> = Algorithm::ALL
        .iter()
        .map(|&a| ClassifierSpec::new(a, 42))
        .collect();
    let start = Instant::now();
    let report =
        benchmark_suite(&data, &SplitSpec::default(), &specs).map_err(|e| e.to_string())?;
    let total = start.elapsed().as_secs_f64();

    let floors = [
        (Algorithm::RandomForest, 98.5),
        (Algorithm::NaiveBayes, 98.5),
        (Algorithm::DecisionTree, 96.0),
        (Algorithm::Knn, 95.5),
        (Algorithm::LogisticRegression, 92.0),
        (Algorithm::Svm, 85.0),
        (Algorithm::NeuralNet, 85.0),
    ];
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for (alg, floor) in floors {
        let m = report
            .metric(alg)
            .ok_or(format!("{alg:?} missing from report"))?;
        summary.push(format!("{} {:.2}", alg.abbreviation(), m.accuracy));
        if m.accuracy < floor {
            failures.push(format!(
                "{} accuracy {:.2} < {floor}",
                alg.abbreviation(),
                m.accuracy
            ));
        }
        for (what, v) in [("precision", m.precision), ("recall", m.recall)] {
            if (v - m.accuracy).abs() > 1.5 {
                failures.push(format!(
                    "{} {what} {v:.2} is more than 1.5 from accuracy {:.2}",
                    alg.abbreviation(),
                    m.accuracy
                ));
            }
        }
    }
    let rf = report.metric(Algorithm::RandomForest).unwrap().accuracy;
    if report.metrics.iter().any(|m| m.accuracy > rf) {
        failures.push(format!("RF {rf:.2} is not the top accuracy"));
    }
    for t in &report.timings {
        if t.training_time >= 60.0 {
            failures.push(format!(
                "{} trained in {:.1}s",
                t.algorithm.abbreviation(),
                t.training_time
            ));
        }
    }
    if total >= 120.0 {
        failures.push(format!("suite took {total:.1}s"));
    }
    check!(failures.is_empty(), "{}", failures.join("; "));
    Ok(format!("{} (suite {total:.1}s)", summary.join(", ")))
}

struct Fixture {
    train: Dataset,
    queries: Vec<[f64; 7]>,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = SeededRng::new(seed);
    let n = 10 + rng.below(41);
    let classes = 2 + rng.below(3);
    let centers: Vec<[f64; 7]> = (0..classes)
        .map(|_| std::array::from_fn(|_| rng.uniform(10.0, 90.0)))
        .collect();
    let spread = rng.uniform(5.0, 30.0);
    let samples = (0..n)
        .map(|i| {
            let c = if i < classes { i } else { rng.below(classes) };
            let v: [f64; 7] = std::array::from_fn(|f| centers[c][f] + rng.uniform(-spread, spread));
            LabeledSample {
                reading: SensorReading::from_array(v),
                label: format!("class{c}"),
            }
        })
        .collect();
    let queries = (0..25)
        .map(|_| std::array::from_fn(|_| rng.uniform(-20.0, 120.0)))
        .collect();
    Fixture {
        train: Dataset::new(samples),
        queries,
    }
}

/// Min-max scaling computed directly from the training rows.
fn oracle_scale(train: &Dataset) -> impl Fn(&[f64; 7]) -> [f64; 7] {
    let rows: Vec<[f64; 7]> = train
        .samples()
        .iter()
        .map(|s| s.reading.to_array())
        .collect();
    let lo: [f64; 7] =
        std::array::from_fn(|f| rows.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min));
    let hi: [f64; 7] =
        std::array::from_fn(|f| rows.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max));
    move |x| {
        std::array::from_fn(|f| {
            if hi[f] > lo[f] {
                (x[f] - lo[f]) / (hi[f] - lo[f])
            } else {
                0.0
            }
        })
    }
}

fn population_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (
        mean,
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n,
    )
}

/// Log-posterior enumeration over every class.
fn nb_oracle(train: &Dataset, x: &[f64; 7]) -> String {
    let scale = oracle_scale(train);
    let rows: Vec<([f64; 7], &str)> = train
        .samples()
        .iter()
        .map(|s| (scale(&s.reading.to_array()), s.label.as_str()))
        .collect();
    let eps = 1e-9
        * (0..7)
            .map(|f| population_variance(&rows.iter().map(|r| r.0[f]).collect::<Vec<_>>()).1)
            .fold(0.0, f64::max);
    let q = scale(x);
    let mut best: Option<(f64, &str)> = None;
    for label in train.labels() {
        let members: Vec<&[f64; 7]> = rows.iter().filter(|r| r.1 == label).map(|r| &r.0).collect();
        let mut lp = (members.len() as f64 / rows.len() as f64).ln();
        for f in 0..7 {
            let (m, v) = population_variance(&members.iter().map(|r| r[f]).collect::<Vec<_>>());
            let v = v + eps;
            lp += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (q[f] - m).powi(2) / (2.0 * v);
        }
        if best.is_none_or(|(b, _)| lp > b) {
            best = Some((lp, label));
        }
    }
    best.unwrap().1.to_string()
}

/// Exhaustive distance sort, k = 5.
fn knn_oracle(train: &Dataset, x: &[f64; 7]) -> String {
    let scale = oracle_scale(train);
    let q = scale(x);
    let mut d: Vec<(f64, usize)> = train
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = scale(&s.reading.to_array());
            ((0..7).map(|f| (p[f] - q[f]).powi(2)).sum::<f64>().sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(dist, i) in d.iter().take(5) {
        let e = tally.entry(train.samples()[i].label.as_str()).or_default();
        e.0 += 1;
        e.1 += dist;
    }
    // BTreeMap iterates labels lexicographically, so the first strict winner breaks final ties
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (votes, sum)) in tally {
        let better = match best {
            None => true,
            Some((_, bv, bs)) => votes > bv || (votes == bv && sum < bs),
        };
        if better {
            best = Some((label, votes, sum));
        }
    }
    best.unwrap().0.to_string()
}

fn oracles() -> Outcome {
    let mut compared = 0;
    for seed in 0..20u64 {
        let fx = fixture(1000 + seed);
        for (alg, oracle) in [
            (
                Algorithm::NaiveBayes,
                nb_oracle as fn(&Dataset, &[f64; 7]) -> String,
            ),
            (Algorithm::Knn, knn_oracle),
        ] {
            let model =
                fit(&ClassifierSpec::new(alg, seed), &fx.train).map_err(|e| e.to_string())?;
            for q in &fx.queries {
                let got = model
                    .predict(&SensorReading::from_array(*q))
                    .map_err(|e| e.to_string())?;
                let want = oracle(&fx.train, q);
                check!(
                    got == want,
                    "fixture {seed} {}: model {got}, oracle {want} at {q:?}",
                    alg.abbreviation()
                );
                compared += 1;
            }
        }
    }
    Ok(format!(
        "{compared}/{compared} predictions agree over 20 fixtures"
    ))
}

fn tree_invariance() -> Outcome {
    let data = dataset();
    let (train, test) =
        stratified_split(&data, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for alg in [Algorithm::DecisionTree, Algorithm::RandomForest] {
        let spec = ClassifierSpec::new(alg, 42);
        let scaled = fit(&spec, &train).map_err(|e| e.to_string())?;
        let raw =
            fit_with_scaler(&spec, &train, MinMaxScaler::identity()).map_err(|e| e.to_string())?;
        for s in test.samples() {
            let (a, b) = (
                scaled.predict(&s.reading).unwrap(),
                raw.predict(&s.reading).unwrap(),
            );
            check!(a == b, "{}: scaled {a} vs raw {b}", alg.abbreviation());
            compared += 1;
        }
    }
    Ok(format!("{compared}/{compared} test predictions identical"))
}

const CROPS: [&str; 6] = ["rice", "maize", "kidneybeans", "café", "ज्वार", "x"];

fn random_record(rng: &mut SeededRng) -> PredictionRecord {
    let mut name = CROPS[rng.below(CROPS.len())].to_string();
    for _ in 0..rng.below(4) {
        name.push(
            char::from_u32(0x21 + rng.below(0x2000) as u32)
                .filter(|c| !c.is_control())
                .unwrap_or('z'),
        );
    }
    let mut f = || match rng.below(4) {
        0 => 0,
        1 => u64::MAX,
        _ => rng.next_u64() >> rng.below(64),
    };
    PredictionRecord {
        crop_name: name,
        n: f(),
        p: f(),
        k: f(),
        ph: f(),
        rain: f(),
        temp: f(),
        hum: f(),
    }
}

fn ledger() -> Outcome {
    let mut rng = SeededRng::new(7);

    // (a) call data round trip
    for i in 0..1000 {
        let rec = random_record(&mut rng);
        let data = encode_add_prediction(&rec).map_err(|e| e.to_string())?;
        let back = decode_add_prediction(&data).map_err(|e| e.to_string())?;
        check!(back == rec, "record {i} changed in round trip");
        check!(
            encode_add_prediction(&back).unwrap() == data,
            "record {i} re-encodes differently"
        );
    }

    // (b) 1000 submissions
    let sender = Address::derived("node");
    let mut chain = Chain::genesis(ChainConfig::default());
    let mut submitted = Vec::new();
    for i in 0..1000u64 {
        let rec = random_record(&mut rng);
        chain
            .submit_prediction(sender, &rec, 1_710_970_000 + i / 3)
            .map_err(|e| e.to_string())?;
        submitted.push(rec);
    }
    chain.verify_chain().map_err(|v| v.to_string())?;
    for (i, rec) in submitted.iter().enumerate() {
        check!(
            chain.get_prediction(i as u64) == Some(rec),
            "prediction {i} differs from its submission"
        );
    }

    // (d) block shapes
    let g = &chain.blocks()[0];
    check!(
        g.transactions.is_empty() && g.gas_used == 0,
        "genesis is not empty"
    );
    check!(
        chain.blocks()[1..]
            .iter()
            .all(|b| b.transactions.len() == 1),
        "a mined block lacks exactly one transaction"
    );

    // (c) tampering: bit flips in persisted blocks and edits to contract state
    let mut small = Chain::genesis(ChainConfig::default());
    for rec in &submitted[..40] {
        small
            .submit_prediction(sender, rec, 1_710_970_000)
            .unwrap();
    }
    let mut bytes = Vec::new();
    write_chain(&small, &mut bytes).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
    for t in 0..150 {
        let mut copy = bytes.clone();
        let at = header_end + rng.below(bytes.len() - header_end);
        copy[at] ^= 1 << rng.below(8);
        check!(
            read_chain(&copy[..]).is_err(),
            "bit flip {t} at byte {at} went undetected"
        );
    }
    for t in 0..50 {
        let mut copy = small.clone();
        let i = rng.below(copy.contract_state().len());
        let r = &mut copy.contract_state_mut()[i];
        let delta = 1 + rng.below(1000) as u64;
        match rng.below(8) {
            0 => r.crop_name.push('s'),
            1 => r.n = r.n.wrapping_add(delta),
            2 => r.p = r.p.wrapping_add(delta),
            3 => r.k = r.k.wrapping_add(delta),
            4 => r.ph = r.ph.wrapping_add(delta),
            5 => r.rain = r.rain.wrapping_add(delta),
            6 => r.temp = r.temp.wrapping_add(delta),
            _ => r.hum = r.hum.wrapping_add(delta),
        }
        check!(
            copy.verify_chain().is_err(),
            "state mutation {t} of prediction {i} went undetected"
        );
    }
    Ok(
        "1000 round trips, 1000 submissions verified, 200/200 tamperings detected, block shapes ok"
            .into(),
    )
}

fn end_to_end() -> Outcome {
    let data = dataset();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (train, _) = stratified_split(&data, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let model = fit(&ClassifierSpec::new(Algorithm::RandomForest, 42), &train)
        .map_err(|e| e.to_string())?;
    let cfg = ServiceConfig {
        model: dir.path().join("model.json"),
        chain: dir.path().join("chain.jsonl"),
        ..ServiceConfig::default()
    };
    save_model(&model, std::fs::File::create(&cfg.model).unwrap()).map_err(|e| e.to_string())?;

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let start = Instant::now();
        let svc = Arc::new(Service::open(&cfg).map_err(|e| e.to_string())?);
        let (tx, rx) = tokio::sync::oneshot::channel();
        tokio::spawn(http::serve(
            http::router(svc, None),
            SocketAddr::from(([127, 0, 0, 1], 0)),
            move |a| tx.send(a).unwrap(),
            std::future::pending(),
        ));
        let addr = rx.await.map_err(|e| e.to_string())?;
        let target = format!("http://{addr}");

        let sim_cfg = SimConfig {
            mode: SimMode::Replay,
            rate: 100.0,
            ..SimConfig::default()
        };
        let sim = Simulator::new(sim_cfg, &data).map_err(|e| e.to_string())?;
        let summary = run_simulation(&sim, &target, 1)
            .await
            .map_err(|e| e.to_string())?;
        check!(
            summary.accepted == 1,
            "ingest did not accept row 0: {summary:?}"
        );

        let view: PredictionView = reqwest::get(format!("{target}/api/v1/predictions/0"))
            .await
            .map_err(|e| e.to_string())?
            .json()
            .await
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        check!(
            view.record.crop_name == "rice",
            "stored crop is {}",
            view.record.crop_name
        );
        let r = &view.record;
        let stored =
            [&r.n, &r.p, &r.k, &r.temp, &r.hum, &r.ph, &r.rain].map(|s| s.parse::<f64>().unwrap());
        let row = data.samples()[0].reading.to_array();
        for f in 0..7 {
            check!(
                (stored[f] - row[f]).abs() <= 0.005 + 1e-9,
                "feature {f}: stored {} vs row {}",
                stored[f],
                row[f]
            );
        }
        check!(elapsed < 5.0, "took {elapsed:.2}s");
        Ok(format!(
            "row 0 stored as rice in block {}, features within 0.005, {elapsed:.2}s",
            view.block_number
        ))
    })
}

fn run_bench(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_cropchain"))
        .args(["bench", "--seed", "42", "--test-fraction", "0.25", "--data"])
        .arg(data_path())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check!(
        status.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn metrics_section(dir: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let metrics = v.get("metrics").ok_or("report has no metrics section")?;
    Ok(serde_json::to_string_pretty(metrics).unwrap())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_bench(&a)?;
    run_bench(&b)?;
    let (ma, mb) = (metrics_section(&a)?, metrics_section(&b)?);
    check!(ma == mb, "metric sections differ");
    let (ca, cb) = (
        std::fs::read(a.join("accuracy.csv")).unwrap(),
        std::fs::read(b.join("accuracy.csv")).unwrap(),
    );
    check!(ca == cb, "accuracy.csv differs");
    Ok(format!("metric sections identical ({} bytes)", ma.len()))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("benchmark reproduction", benchmark),
        ("oracle equivalence (NB, KNN)", oracles),
        ("tree scaling invariance (DT, RF)", tree_invariance),
        ("ledger integrity suite", ledger),
        ("end-to-end ingest to chain", end_to_end),
        ("bench determinism", determinism),
    ];
    println!("data: {}", data_path().display());
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
