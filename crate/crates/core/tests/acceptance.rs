//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use posthoc::counterfactual::{
    find_counterfactual, oracle_grid_search, render_contrast, DistanceConfig, DistanceKind, SearchConfig, TargetSpec,
};
use posthoc::fidelity::validity_profile;
use posthoc::model::{Activation, GradientMethod, ModelSpec, OutputKind, OutputSelector};
use posthoc::surrogate::{
    explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy, SurrogateExplanation,
};
use posthoc::{fixtures, DataPoint, Dataset, FeatureSpec, Model, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn reference(model: &Model, b: &DataPoint) -> BaselineConfig {
    BaselineConfig::resolve(model.schema(), BaselineStrategy::Reference { values: b.clone() }, None).unwrap()
}

fn opts() -> AttributionOptions {
    AttributionOptions::default()
}

fn f_at(model: &Model, p: &[f64]) -> f64 {
    model.raw(p).unwrap()[0]
}

/// Exact Shapley on 200 random models: efficiency, plus symmetry and dummy
/// for every feature pair the brute-force cube check shows to qualify.
fn axiom_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut sym_checks, mut dummy_checks, mut worst_eff) = (0usize, 0usize, 0.0f64);
    for i in 0..200 {
        let d = rng.gen_range(2..=8);
        let dummy = rng.gen_range(0..d);
        let (mut x, mut b) = (common::point(&mut rng, d), common::point(&mut rng, d));
        let model = match i % 3 {
            0 => {
                let m = common::linear(&mut rng, d);
                let ModelSpec::Linear { mut weights, bias, link } = m.spec().clone() else { unreachable!() };
                weights[dummy] = 0.0;
                Model::new(common::schema(d), ModelSpec::Linear { weights, bias, link }, OutputKind::Score, vec![])
                    .unwrap()
            }
            1 => {
                let act = if rng.gen_bool(0.5) { Activation::Tanh } else { Activation::Relu };
                let m = common::mlp(&mut rng, d, act, &[dummy]);
                // a symmetric pair: copy one input column onto another and match x and b there
                let (p, q) = ((dummy + 1) % d, (dummy + 2) % d);
                if p != q && q != dummy {
                    let ModelSpec::Mlp { mut layers } = m.spec().clone() else { unreachable!() };
                    for row in &mut layers[0].weights {
                        row[q] = row[p];
                    }
                    x.values_mut()[q] = x.values()[p];
                    b.values_mut()[q] = b.values()[p];
                    Model::new(common::schema(d), ModelSpec::Mlp { layers }, OutputKind::Score, vec![]).unwrap()
                } else {
                    m
                }
            }
            _ => common::tree(&mut rng, d, 4, &[dummy]),
        };
        let e = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(&reference(&model, &b)), &opts())
            .map_err(|e| e.to_string())?;
        let phi = &e.weights;
        let gap = f_at(&model, x.values()) - f_at(&model, b.values());
        let eff = (phi.iter().sum::<f64>() - gap).abs();
        worst_eff = worst_eff.max(eff);
        ensure(eff <= 1e-9, || format!("model {i}: efficiency gap {eff:e}"))?;

        let table: Vec<f64> = (0..1u64 << d).map(|m| common::vertex(&model, x.values(), b.values(), m)).collect();
        for k in 0..d {
            let is_dummy = (0..1u64 << d).filter(|m| m >> k & 1 == 0).all(|m| table[(m | 1 << k) as usize] == table[m as usize]);
            if is_dummy {
                dummy_checks += 1;
                ensure(phi[k].abs() <= 1e-9, || format!("model {i}: dummy feature {k} got {}", phi[k]))?;
            }
            for j in k + 1..d {
                let symmetric = (0..1u64 << d)
                    .filter(|m| m >> k & 1 == 0 && m >> j & 1 == 0)
                    .all(|m| table[(m | 1 << k) as usize] == table[(m | 1 << j) as usize]);
                if symmetric {
                    sym_checks += 1;
                    ensure((phi[k] - phi[j]).abs() <= 1e-9, || {
                        format!("model {i}: symmetric {k},{j} got {} vs {}", phi[k], phi[j])
                    })?;
                }
            }
        }
    }
    ensure(dummy_checks >= 200 && sym_checks >= 60, || {
        format!("too few axiom instances: {dummy_checks} dummy, {sym_checks} symmetric")
    })?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "200 models, max efficiency gap {worst_eff:.1e}, {dummy_checks} dummy and {sym_checks} symmetry checks, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn additive_agreement() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let d = rng.gen_range(1..=8);
        let model = common::linear(&mut rng, d);
        let (x, b) = (common::point(&mut rng, d), common::point(&mut rng, d));
        let base = reference(&model, &b);
        let shapley = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(&base), &opts()).unwrap();
        let ModelSpec::Linear { weights, .. } = model.spec() else { unreachable!() };
        let truth: Vec<f64> = (0..d).map(|k| weights[k] * (x.values()[k] - b.values()[k])).collect();
        for scheme in [
            AttributionScheme::EdgeFromData,
            AttributionScheme::BanzhafExact,
            AttributionScheme::LimeKernel { n_samples: 1 << d, kernel_width: None, seed: i },
        ] {
            let e = explain(&model, &x, &scheme, Some(&base), &opts()).map_err(|e| e.to_string())?;
            for (k, ((w, s), t)) in e.weights.iter().zip(&shapley.weights).zip(&truth).enumerate() {
                let gap = (w - s).abs().max((s - t).abs());
                worst = worst.max(gap);
                ensure(gap <= 1e-6, || format!("model {i} {}: feature {k} off by {gap:e}", scheme.name()))?;
            }
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("50 linear models, max gap {worst:.1e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn divergence_witness() -> Outcome {
    let model = posthoc::load_model(fixtures::OR_AND3).unwrap();
    let x = DataPoint::new(vec![1.0; 3]);
    let zero = BaselineConfig::resolve(model.schema(), BaselineStrategy::Zero, None).unwrap();
    let bz = explain(&model, &x, &AttributionScheme::BanzhafExact, Some(&zero), &opts()).unwrap();
    let sh = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(&zero), &opts()).unwrap();
    let cube = |m: u64| common::vertex(&model, x.values(), zero.resolved.values(), m);
    let (bz_oracle, sh_oracle) = (common::banzhaf_by_subsets(cube, 3), common::shapley_by_permutations(cube, 3));
    ensure((bz.weights[0] - 0.75).abs() <= 1e-9, || format!("Banzhaf z1 = {}", bz.weights[0]))?;
    ensure((sh.weights[0] - 2.0 / 3.0).abs() <= 1e-9, || format!("Shapley z1 = {}", sh.weights[0]))?;
    ensure((bz_oracle[0] - 0.75).abs() <= 1e-12 && (sh_oracle[0] - 2.0 / 3.0).abs() <= 1e-12, || {
        "brute-force oracle disagrees with the frozen values".into()
    })?;
    Ok(format!("Banzhaf z1 = {:.12}, Shapley z1 = {:.12}", bz.weights[0], sh.weights[0]))
}

/// Twenty two-feature models on [-1, 1]^2: eight linear, eight tanh and
/// four ReLU networks, each with a target taken from a random point.
fn counterfactual_oracle() -> Outcome {
    let start = Instant::now();
    let schema = Schema::new(vec![
        FeatureSpec::continuous("u").with_bounds(-1.0, 1.0),
        FeatureSpec::continuous("v").with_bounds(-1.0, 1.0),
    ])
    .unwrap();
    let axis: Vec<f64> = (0..=400).map(|i| -1.0 + 0.005 * i as f64).collect();
    let grid = vec![axis.clone(), axis];
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (mut compared, mut worst_ratio, mut converged) = (0, 0.0f64, 0);
    let mut search_time = Duration::ZERO;
    for i in 0..20 {
        let raw = match i {
            0..=7 => common::linear(&mut rng, 2),
            8..=15 => common::mlp(&mut rng, 2, Activation::Tanh, &[]),
            _ => common::mlp(&mut rng, 2, Activation::Relu, &[]),
        };
        let model = Model::new(schema.clone(), raw.spec().clone(), OutputKind::Score, vec![]).unwrap();
        let x = DataPoint::new(vec![rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)]);
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let target = TargetSpec::score(f_at(&model, &p), 0.01);
        let kind = if i % 2 == 0 { DistanceKind::L2 } else { DistanceKind::MadWeightedL1 };
        let dist = DistanceConfig::new(&schema, kind, None, vec![]).unwrap();
        let t = Instant::now();
        let r = find_counterfactual(&model, &x, &target, &dist, &SearchConfig::default().with_seed(i))
            .map_err(|e| e.to_string())?;
        search_time += t.elapsed();
        let oracle = oracle_grid_search(&model, &x, &target, &dist, &grid).map_err(|e| e.to_string())?;
        let t_val = target.target.unwrap();
        if r.converged {
            converged += 1;
            let gap = (f_at(&model, r.c.values()) - t_val).abs();
            ensure(gap <= 0.01 + 1e-12, || format!("fixture {i}: converged but |f(c) - T| = {gap}"))?;
        }
        if r.converged && oracle.converged {
            compared += 1;
            let ratio = if oracle.distance > 0.0 { r.distance / oracle.distance } else { 1.0 + r.distance };
            worst_ratio = worst_ratio.max(ratio);
            ensure(r.distance <= 1.05 * oracle.distance + 1e-12, || {
                format!("fixture {i}: search {} vs oracle {}", r.distance, oracle.distance)
            })?;
        }
    }
    ensure(compared >= 15, || format!("only {compared} fixtures had both converge"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "{converged}/20 converged, {compared} compared, worst search/oracle ratio {worst_ratio:.4}, search {:.1}s, total {:.1}s",
        search_time.as_secs_f64(),
        start.elapsed().as_secs_f64()
    ))
}

fn bee_narrative() -> Outcome {
    let model = posthoc::load_model(fixtures::BEE).unwrap();
    let x = DataPoint::new(vec![6.0, 4.0]);
    let dist = DistanceConfig::with_locked_names(model.schema(), DistanceKind::MadWeightedL1, None, &["legs".into()])
        .unwrap();
    let r = find_counterfactual(&model, &x, &TargetSpec::class("fly", 0.01), &dist, &SearchConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(r.converged, || "search did not converge".into())?;
    ensure(r.c.values() == [6.0, 2.0], || format!("counterfactual {:?}", r.c.values()))?;
    let statement = render_contrast(&x, &r, model.schema());
    let names: Vec<&str> = statement.changed_features.iter().map(|c| c.name.as_str()).collect();
    ensure(names == ["wings"], || format!("changed features {names:?}"))?;
    ensure(statement.text.contains("wings") && !statement.text.contains("legs"), || statement.text.clone())?;
    Ok(statement.text)
}

/// Independent agreement estimate on an L-infinity box of half-width `r`:
/// 1 - median|f - g| / IQR(f).
fn dense_agreement(model: &Model, e: &SurrogateExplanation, r: f64, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let d = model.dim();
    let mut f = Vec::with_capacity(n);
    let mut resid = Vec::with_capacity(n);
    for _ in 0..n {
        let p: Vec<f64> = (0..d).map(|k| e.anchor.values()[k] + rng.gen_range(-r..=r)).collect();
        let fv = f_at(model, &p);
        let g = e.intercept + e.weights.iter().zip(&p).map(|(w, v)| w * v).sum::<f64>();
        resid.push((fv - g).abs());
        f.push(fv);
    }
    f.sort_by(f64::total_cmp);
    resid.sort_by(f64::total_cmp);
    let q = |s: &[f64], t: f64| {
        let pos = t * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    (1.0 - q(&resid, 0.5) / (q(&f, 0.75) - q(&f, 0.25)).max(1e-6)).clamp(0.0, 1.0)
}

/// Last radius on a 0.1 grid where the dense oracle (20,000 samples per
/// radius) keeps agreement at or above 0.95 for the tangent plane at the
/// origin of the kink fixture. Agreement there is 0.986; at 2.3 it is 0.906.
const KINK_CROSSING: f64 = 2.2;

fn kink_validity_radius() -> Outcome {
    let start = Instant::now();
    let model = posthoc::load_model(fixtures::KINK).unwrap();
    let data = Dataset::from_csv(model.schema().clone(), fixtures::KINK_DATA.as_bytes()).unwrap();
    let scale = data.scales();
    ensure(scale.iter().all(|s| *s == 1.0), || format!("fixture MAD {scale:?}"))?;
    let x = DataPoint::new(vec![0.0; 8]);
    let e = explain(&model, &x, &AttributionScheme::Gradient { step: None }, None, &opts()).unwrap();
    let radii: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    let profile = validity_profile(&model, &e, &scale, &radii, 0.95, 2000, 0).map_err(|e| e.to_string())?;
    let found = profile.validity_radius.ok_or("no validity radius")?;

    // the frozen crossing must still bracket the live dense estimate
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let inside = dense_agreement(&model, &e, KINK_CROSSING, 20_000, &mut rng);
    let outside = dense_agreement(&model, &e, KINK_CROSSING + 0.1, 20_000, &mut rng);
    ensure(inside >= 0.95 && outside < 0.95, || {
        format!("dense agreement {inside:.3} at {KINK_CROSSING}, {outside:.3} at {:.1}", KINK_CROSSING + 0.1)
    })?;
    ensure((1.5..=2.5).contains(&found), || format!("validity radius {found}, oracle crossing {KINK_CROSSING}"))?;
    ensure((found - KINK_CROSSING).abs() <= 0.15, || {
        format!("validity radius {found} vs oracle crossing {KINK_CROSSING}")
    })?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "validity radius {found:.1}, dense oracle crossing {KINK_CROSSING} (agreement {inside:.3} / {outside:.3} either side), {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = rng.gen_range(1..=8);
        let act = if i % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let model = common::mlp(&mut rng, d, act, &[]);
        let x = common::point(&mut rng, d);
        let g = model.gradient(x.values(), &GradientMethod::Analytic, OutputSelector::Score).unwrap();
        let fd = model.gradient(x.values(), &GradientMethod::central(1e-6), OutputSelector::Score).unwrap();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        let rel = diff / norm;
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || format!("model {i}: relative error {rel:e}"))?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("100 networks, worst relative error {worst:.1e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn determinism() -> Outcome {
    let (c1, a) = common::cli::invoke(&["bench", "--seed", "7"]);
    let (c2, b) = common::cli::invoke(&["bench", "--seed", "7"]);
    ensure(c1 == 0 && c2 == 0, || format!("bench exit codes {c1}, {c2}"))?;
    ensure(a == b, || "bench output differs between runs".into())?;
    let cases = common::cli::golden_cases();
    for (name, args) in &cases {
        common::cli::check_golden(name, args, 3)?;
    }
    Ok(format!("bench --seed 7 identical ({} bytes), {} golden files stable over 3 runs", a.len(), cases.len()))
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn start(log_dir: &std::path::Path) -> Result<Server, String> {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let addr = format!("127.0.0.1:{port}");
        let child = Command::new(env!("CARGO_BIN_EXE_posthoc"))
            .args(["serve", "--bind", &addr, "--log-dir"])
            .arg(log_dir)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let deadline = Instant::now() + Duration::from_secs(10);
        while TcpStream::connect(&addr).is_err() {
            if Instant::now() > deadline {
                return Err("server did not start".into());
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        Ok(Server { child, addr })
    }

    fn call(&self, method: &str, path: &str, body: Option<&Value>) -> Result<(u16, Value), String> {
        let body = body.map(Value::to_string).unwrap_or_default();
        let mut s = TcpStream::connect(&self.addr).map_err(|e| e.to_string())?;
        write!(
            s,
            "{method} {path} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            self.addr,
            body.len()
        )
        .map_err(|e| e.to_string())?;
        let mut resp = String::new();
        s.read_to_string(&mut resp).map_err(|e| e.to_string())?;
        let (head, payload) = resp.split_once("\r\n\r\n").ok_or("malformed response")?;
        let status = head.split(' ').nth(1).and_then(|c| c.parse().ok()).ok_or("no status")?;
        let value = if payload.is_empty() { Value::Null } else { serde_json::from_str(payload).map_err(|e| e.to_string())? };
        Ok((status, value))
    }

    /// Kills the process without a shutdown handshake.
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn service_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let model_doc: Value = serde_json::from_str(fixtures::LINEAR).unwrap();
    let server = Server::start(dir.path())?;
    let (status, created) = server.call("POST", "/sessions", Some(&json!({"model": model_doc, "point": {"x1": 0, "x2": 0}})))?;
    ensure(status == 201, || format!("create returned {status}: {created}"))?;
    let id = created["id"].as_str().ok_or("no session id")?.to_string();
    let requests = [
        ("whatif", json!({"edits": {"x1": 1.5}})),
        ("attribution", json!({"scheme": "gradient"})),
        ("whatif", json!({"edits": {"x2": -2}})),
        ("counterfactual", json!({"target": 1, "distance": "l2", "search": {"seed": 3}})),
        ("whatif", json!({"edits": {"x1": 0.25, "x2": 0.75}})),
        ("attribution", json!({"scheme": "shapley_exact", "baseline": "zero"})),
        ("fidelity", json!({"explanation_seq": 6, "radii": [0.5, 1], "n_samples": 100, "seed": 1})),
        ("whatif", json!({"edits": {"x2": 3.5}})),
        ("counterfactual", json!({"target": -2, "search": {"seed": 4}})),
        ("whatif", json!({"edits": {"x1": -4}})),
    ];
    for (i, (kind, body)) in requests.iter().enumerate() {
        let (status, resp) = server.call("POST", &format!("/sessions/{id}/{kind}"), Some(body))?;
        ensure(status == 200, || format!("event {} ({kind}) returned {status}: {resp}", i + 1))?;
    }
    let (_, before) = server.call("GET", &format!("/sessions/{id}/history"), None)?;
    let (_, summary) = server.call("GET", &format!("/sessions/{id}"), None)?;
    server.kill();

    let server = Server::start(dir.path())?;
    let (_, after) = server.call("GET", &format!("/sessions/{id}/history"), None)?;
    let (_, summary_after) = server.call("GET", &format!("/sessions/{id}"), None)?;
    server.kill();

    let events: Vec<posthoc::service::Event> = serde_json::from_value(after.clone()).map_err(|e| e.to_string())?;
    ensure(events.len() == 10, || format!("{} events after restart", events.len()))?;
    ensure(before == after, || "history changed across restart".into())?;
    ensure(summary["current_point"] == summary_after["current_point"], || "current point changed".into())?;
    let model = posthoc::load_model(fixtures::LINEAR).unwrap();
    let start = DataPoint::new(vec![0.0, 0.0]);
    let end = posthoc::service::replay_whatifs(&model, &start, &events).map_err(|e| e.to_string())?;
    let replayed = model.schema().point_to_json(&end);
    ensure(replayed == summary_after["current_point"], || {
        format!("replay gives {replayed}, session has {}", summary_after["current_point"])
    })?;
    Ok(format!("10 events identical after kill and restart; replay ends at {replayed}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("attribution axiom suite", axiom_suite),
        ("additive-model agreement", additive_agreement),
        ("divergence witness", divergence_witness),
        ("counterfactual oracle equivalence", counterfactual_oracle),
        ("bee narrative", bee_narrative),
        ("validity-radius detection", kink_validity_radius),
        ("gradient check", gradient_check),
        ("determinism", determinism),
        ("service replay", service_replay),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
