//! Acceptance suite: one `[PASS]` or `[FAIL]` line per criterion, non-zero
//! exit status if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hyptree::embed::{choose_curvature, default_tau_grid, hnn_realize, realized_report};
use hyptree::hypgeom::{
    basepoint, distance, exp_map, lift, log_map, minkowski_inner, parallel_transport, Curvature, HPoint, TangentVec,
};
use hyptree::networks::{
    hnn_forward, memorize_hnn, par_count, reference_memorizer_width, DenseLayer, HnnParams, MlpParams, Network,
    MEMORIZER_PARAM_CONSTANT,
};
use hyptree::train::{grad, init_network, ModelKind, NodeInputs, PairBatch, TrainConfig};
use hyptree::trees::{gen_binary, spring_layout, tree_metric, LayoutParams, WeightedTree};
use hyptree_cli::args::LowerboundArgs;
use hyptree_cli::{cell_means, run_grid, run_study, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.1}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn point(z: &[f64]) -> HPoint {
    exp_map(&basepoint(z.len()).unwrap(), &lift(z).unwrap()).unwrap()
}

/// Random tangent vector at `x` with Minkowski norm in `[0, max_norm]`.
fn tangent(rng: &mut ChaCha8Rng, x: &HPoint, max_norm: f64) -> TangentVec {
    let c = x.coords();
    loop {
        let w = random_vec(rng, c.len(), 1.0);
        let k = minkowski_inner(c, &w).unwrap();
        let v: Vec<f64> = w.iter().zip(c).map(|(wi, ci)| wi + k * ci).collect();
        let n = minkowski_inner(&v, &v).unwrap().max(0.0).sqrt();
        if n > 1e-3 {
            let len = rng.random_range(0.0..max_norm);
            return TangentVec::new(x.clone(), v.iter().map(|vi| vi * len / n).collect()).unwrap();
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 3;
    let mut worst_round_trip = 0.0f64;
    for _ in 0..100 {
        let x = point(&random_vec(&mut rng, dim, 2.0));
        let v = tangent(&mut rng, &x, 5.0);
        let back = log_map(&x, &exp_map(&x, &v).unwrap()).unwrap();
        worst_round_trip = worst_round_trip.max(max_abs_diff(back.vec(), v.vec()));
    }
    check(worst_round_trip <= 1e-7, || format!("Exp/Log round trip {worst_round_trip:e}"))?;

    let k = Curvature::UNIT;
    for _ in 0..1000 {
        let (x, y, z) = (
            point(&random_vec(&mut rng, dim, 1.5)),
            point(&random_vec(&mut rng, dim, 1.5)),
            point(&random_vec(&mut rng, dim, 1.5)),
        );
        let (dxy, dyx) = (distance(&x, &y, k).unwrap(), distance(&y, &x, k).unwrap());
        let (dxz, dyz) = (distance(&x, &z, k).unwrap(), distance(&y, &z, k).unwrap());
        check(dxy > 0.0 && distance(&x, &x, k).unwrap() <= 1e-7, || "positivity".into())?;
        check((dxy - dyx).abs() <= 1e-12 * dxy.max(1.0), || "symmetry".into())?;
        check(dxz <= dxy + dyz + 1e-9, || format!("triangle {dxz} > {dxy} + {dyz}"))?;
    }

    let mut worst_transport = 0.0f64;
    for _ in 0..100 {
        let x = point(&random_vec(&mut rng, dim, 2.0));
        let b = point(&random_vec(&mut rng, dim, 2.0));
        let (u, v) = (tangent(&mut rng, &x, 5.0), tangent(&mut rng, &x, 5.0));
        let (pu, pv) = (parallel_transport(&x, &b, &u).unwrap(), parallel_transport(&x, &b, &v).unwrap());
        let before = minkowski_inner(u.vec(), v.vec()).unwrap();
        let after = minkowski_inner(pu.vec(), pv.vec()).unwrap();
        worst_transport = worst_transport.max((before - after).abs());
    }
    check(worst_transport <= 1e-8, || format!("transport error {worst_transport:e}"))?;

    for _ in 0..100 {
        let x = point(&random_vec(&mut rng, dim, 2.0));
        let y = point(&random_vec(&mut rng, dim, 2.0));
        let unit = distance(&x, &y, Curvature::UNIT).unwrap();
        for kappa in [-0.25, -1.0, -4.0] {
            let d = distance(&x, &y, Curvature::new(kappa).unwrap()).unwrap();
            check(d == unit / f64::sqrt(-kappa), || format!("scaling at kappa {kappa}"))?;
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "round trip {worst_round_trip:.1e}, transport {worst_transport:.1e}, 1000 triples, exact scaling"
    ))
}

/// Distance through the Poincare ball, independent of the kernel's formula.
fn poincare_distance(x: &HPoint, y: &HPoint) -> f64 {
    let (a, b) = (x.coords(), y.coords());
    let d = a.len() - 1;
    let gap: f64 = a[..d]
        .iter()
        .zip(&b[..d])
        .map(|(p, q)| p / (1.0 + a[d]) - q / (1.0 + b[d]))
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    2.0 * (gap * ((1.0 + a[d]) * (1.0 + b[d])).sqrt() / 2.0).asinh()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let t = gen_binary(6);
    let lambda = 1.1;
    let (e, kappa, _) = choose_curvature(&t, lambda, &default_tau_grid()).map_err(|e| e.to_string())?;
    let m = tree_metric(&t);
    let scale = (-kappa.kappa()).sqrt();
    let mut pairs = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let r = poincare_distance(&e.points[i], &e.points[j]) / scale / m.get(i, j);
            lo = lo.min(r);
            hi = hi.max(r);
            pairs += 1;
        }
    }
    check(pairs == 8001, || format!("{pairs} pairs"))?;
    check(lo >= 1.0 / lambda && hi <= lambda, || format!("ratios in [{lo}, {hi}]"))?;
    check(e.tau <= 64.0, || format!("tau {}", e.tau))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("tau {} (kappa {}), 8001 pair ratios in [{lo:.4}, {hi:.4}]", e.tau, kappa.kappa()))
}

/// 31 nodes: a hub with three legs, each a unit edge followed by nine edges
/// of weight 0.05.
fn three_leg_tree() -> WeightedTree {
    let mut edges = Vec::new();
    let mut next = 1;
    for _ in 0..3 {
        let mut prev = 0;
        for k in 0..10 {
            edges.push((prev, next, if k == 0 { 1.0 } else { 0.05 }));
            prev = next;
            next += 1;
        }
    }
    let mut t = WeightedTree::from_edges(next, &edges).unwrap();
    spring_layout(&mut t, &LayoutParams::default(), 0).unwrap();
    t
}

fn criterion_3() -> Outcome {
    let t = three_leg_tree();
    let mut triples = Vec::new();
    for lambda in [1.5, 1.1, 1.01] {
        let (e, kappa, report) =
            choose_curvature(&t, lambda, &default_tau_grid()).map_err(|e| format!("lambda {lambda}: {e}"))?;
        let p = hnn_realize(&e, &t, 0).map_err(|e| e.to_string())?;
        let realized = realized_report(&p, kappa, &t, &tree_metric(&t)).map_err(|e| e.to_string())?;
        check(realized.within(lambda) && (realized.dist - report.dist).abs() <= 1e-5, || {
            format!("lambda {lambda}: realized distortion {} vs {}", realized.dist, report.dist)
        })?;
        let c = par_count(&p);
        triples.push((lambda, e.tau, (c.depth, c.width, c.par)));
    }
    let first = triples[0].2;
    check(triples.iter().all(|t| t.2 == first), || format!("{triples:?}"))?;
    let taus: Vec<String> = triples.iter().map(|t| format!("{}:{}", t.0, t.1)).collect();
    Ok(format!(
        "(depth, width, par) = {first:?} for lambda 1.5, 1.1, 1.01 (tau {})",
        taus.join(", ")
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, d, count) = (3, 2, 50);
    let inputs: Vec<Vec<f64>> = (0..count).map(|_| random_vec(&mut rng, n, 1.0)).collect();
    let targets: Vec<HPoint> = (0..count).map(|_| HPoint::from_spatial(&random_vec(&mut rng, d, 3.0)).unwrap()).collect();
    let p = memorize_hnn(&inputs, &targets, 0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (x, y) in inputs.iter().zip(&targets) {
        let out = hnn_forward(&p, x).map_err(|e| e.to_string())?;
        worst = worst.max(poincare_distance(&out, y));
    }
    check(worst <= 1e-6, || format!("max error {worst:e}"))?;
    let c = par_count(&p);
    let bound = MEMORIZER_PARAM_CONSTANT * count * (n + d);
    check(c.par <= bound, || format!("par {} > {bound}", c.par))?;
    Ok(format!(
        "max error {worst:.1e}, par {} <= {bound}, width {} (reference width {})",
        c.par,
        c.width,
        reference_memorizer_width(n, count, d)
    ))
}

fn rel_err(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-6)
}

fn batch_loss(net: &Network, inputs: &NodeInputs, batch: &PairBatch) -> f64 {
    grad(net, inputs, batch, false).unwrap().0
}

fn layers_of(net: &Network) -> Vec<DenseLayer> {
    match net {
        Network::Mlp(p) => p.layers().to_vec(),
        Network::Hnn(p) => p.layers().to_vec(),
    }
}

fn with_layers(net: &Network, layers: Vec<DenseLayer>) -> Network {
    match net {
        Network::Mlp(_) => Network::Mlp(MlpParams::new(layers).unwrap()),
        Network::Hnn(p) => Network::Hnn(HnnParams::new(p.c0().clone(), layers, p.biases().to_vec()).unwrap()),
    }
}

/// Worst relative errors (dense, hyperbolic) of the analytic gradient
/// against central differences with step 1e-5. Hyperbolic points are
/// perturbed in the chart `z -> (z, sqrt(1 + |z|^2))`, whose derivative is
/// paired with the Riemannian gradient by the Minkowski product.
fn gradient_errors(net: &Network, inputs: &NodeInputs, batch: &PairBatch) -> (f64, f64) {
    let (_, g) = grad(net, inputs, batch, false).unwrap();
    let h = 1e-5;
    let fd = |f: &dyn Fn(f64) -> Network| (batch_loss(&f(h), inputs, batch) - batch_loss(&f(-h), inputs, batch)) / (2.0 * h);
    let base = layers_of(net);
    let mut dense = 0.0f64;
    for (l, layer) in base.iter().enumerate() {
        for r in 0..layer.a.nrows() {
            for c in 0..layer.a.ncols() {
                let f = fd(&|delta| {
                    let mut ls = base.clone();
                    ls[l].a[[r, c]] += delta;
                    with_layers(net, ls)
                });
                dense = dense.max(rel_err(g.layers[l].a[[r, c]], f));
            }
            let f = fd(&|delta| {
                let mut ls = base.clone();
                ls[l].b[r] += delta;
                with_layers(net, ls)
            });
            dense = dense.max(rel_err(g.layers[l].b[r], f));
        }
    }
    let mut hyper = 0.0f64;
    if let Network::Hnn(p) = net {
        for k in 0..=p.biases().len() {
            let pt = if k == 0 { p.c0() } else { &p.biases()[k - 1] };
            let riem = if k == 0 { &g.c0 } else { &g.biases[k - 1] };
            let dim = pt.dim();
            for i in 0..dim {
                let f = fd(&|delta| {
                    let mut z = pt.spatial().to_vec();
                    z[i] += delta;
                    let moved = HPoint::from_spatial(&z).unwrap();
                    let (mut c0, mut biases) = (p.c0().clone(), p.biases().to_vec());
                    if k == 0 {
                        c0 = moved;
                    } else {
                        biases[k - 1] = moved;
                    }
                    Network::Hnn(HnnParams::new(c0, p.layers().to_vec(), biases).unwrap())
                });
                let c = pt.coords();
                let mut dc = vec![0.0; dim + 1];
                dc[i] = 1.0;
                dc[dim] = c[i] / c[dim];
                hyper = hyper.max(rel_err(minkowski_inner(riem, &dc).unwrap(), f));
            }
        }
    }
    (dense, hyper)
}

/// Small network with random dense biases and, for HNNs, random hyperbolic
/// biases off the basepoint.
fn small_network(kind: ModelKind, hidden_layers: usize, width: usize, dim: usize, seed: u64) -> Network {
    let cfg = TrainConfig {
        model_kind: kind,
        hidden_layers,
        hidden_width: width,
        embed_dim: dim,
        seed,
        ..TrainConfig::default()
    };
    let net = init_network(&cfg, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let mut layers = layers_of(&net);
    for l in &mut layers {
        l.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    match net {
        Network::Mlp(_) => Network::Mlp(MlpParams::new(layers).unwrap()),
        Network::Hnn(p) => {
            let mut off = |d: usize| HPoint::from_spatial(&random_vec(&mut rng, d, 0.6)).unwrap();
            let c0 = off(p.c0().dim());
            let biases = p.biases().iter().map(|c| off(c.dim())).collect();
            Network::Hnn(HnnParams::new(c0, layers, biases).unwrap())
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut t = gen_binary(3);
    spring_layout(&mut t, &LayoutParams::default(), 0).unwrap();
    let inputs = NodeInputs::from_tree(&t).unwrap();
    let m = tree_metric(&t);
    let nets = [
        small_network(ModelKind::Mlp, 2, 6, 2, 1),
        small_network(ModelKind::Hnn, 1, 5, 2, 2),
        small_network(ModelKind::Hnn, 2, 4, 3, 3),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut dense, mut hyper) = (0.0f64, 0.0f64);
    for net in &nets {
        for _ in 0..5 {
            let idx: Vec<(usize, usize)> = (0..6)
                .map(|_| {
                    let i = rng.random_range(0..t.len());
                    let j = (i + rng.random_range(1..t.len())) % t.len();
                    (i, j)
                })
                .collect();
            let batch = PairBatch::from_indices(&t, &m, &idx);
            let (d, h) = gradient_errors(net, &inputs, &batch);
            dense = dense.max(d);
            hyper = hyper.max(h);
        }
    }
    check(dense <= 1e-4, || format!("dense relative error {dense:e}"))?;
    check(hyper <= 1e-3, || format!("hyperbolic relative error {hyper:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("3 networks x 5 batches: dense {dense:.1e}, hyperbolic {hyper:.1e}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg: ExperimentConfig = serde_json::from_str(
        r#"{"tree_kind": ["binary", "ternary", "random"], "sizes": [127, 255, 511],
            "dims": [2, 4, 6, 8], "seeds": [0, 1, 2]}"#,
    )
    .map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows = run_grid(&cfg, dir.path(), false).map_err(|e| e.to_string())?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    let means = cell_means(&rows);
    let mut cells: BTreeMap<(String, usize, usize), (f64, f64)> = BTreeMap::new();
    for (&(kind, n, dim, model), &v) in &means {
        let e = cells.entry((kind.name().to_string(), n, dim)).or_insert((f64::NAN, f64::NAN));
        match model {
            ModelKind::Mlp => e.0 = v,
            ModelKind::Hnn => e.1 = v,
        }
    }
    let total = cells.len();
    let wins = cells.values().filter(|(mlp, hnn)| hnn < mlp).count();
    let d2: Vec<_> = cells.iter().filter(|(k, _)| k.2 == 2).collect();
    let d2_wins = d2.iter().filter(|(_, (mlp, hnn))| hnn < mlp).count();
    let losses: Vec<String> = cells
        .iter()
        .filter(|(_, (mlp, hnn))| !(hnn < mlp))
        .map(|(k, (mlp, hnn))| format!("{} n={} d={}: hnn {hnn:.3} mlp {mlp:.3}", k.0, k.1, k.2))
        .collect();
    let summary = format!(
        "hnn below mlp in {wins}/{total} cells, {d2_wins}/{} dim-2 cells, {failed} failed rows, {:.0}s",
        d2.len(),
        start.elapsed().as_secs_f64()
    );
    check(total == 36 && failed == 0, || format!("{summary}; incomplete grid"))?;
    check(wins as f64 >= 0.8 * total as f64 && d2_wins == d2.len(), || {
        format!("{summary}; losing cells: {}", losses.join("; "))
    })?;
    within(start.elapsed(), 600.0)?;
    Ok(if losses.is_empty() { summary } else { format!("{summary}; losing cells: {}", losses.join("; ")) })
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let args = LowerboundArgs {
        dim: 2,
        leaves: vec![8, 16, 32, 64],
        lambda: 1.1,
        restarts: 3,
        epochs: 100,
        batch_size: 256,
        lr: 3e-3,
        tau_max: 64.0,
        tau_steps: 8,
    };
    let (rows, slope) = run_study(&args, 0).map_err(|e| e.to_string())?;
    let mlp: Vec<f64> = rows.iter().map(|r| r.mlp.dist()).collect();
    let hnn: Vec<f64> = rows.iter().map(|r| r.hnn.map_or(f64::INFINITY, |h| h.0.dist)).collect();
    let summary = format!(
        "mlp {:?}, hnn {:?}, exponent {:?}, {:.0}s",
        mlp.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        hnn.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        slope,
        start.elapsed().as_secs_f64()
    );
    check(mlp.windows(2).all(|w| w[1] >= w[0]), || format!("{summary}; mlp not monotone"))?;
    check(slope.is_some_and(|s| s > 0.0), || format!("{summary}; exponent not positive"))?;
    check(hnn.iter().all(|&d| d <= 1.1), || format!("{summary}; hnn above 1.1"))?;
    within(start.elapsed(), 300.0)?;
    Ok(summary)
}

/// Runs the binary in `dir` with relative paths so outputs from different
/// directories can be compared byte for byte.
fn run_in(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_hyptree"))
        .current_dir(dir)
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr))
    })
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn criterion_8() -> Outcome {
    let grid = r#"{"tree_kind": ["binary", "random"], "sizes": [31], "dims": [2], "seeds": [0, 1],
        "train": {"epochs": 3, "hidden_width": 16, "hidden_layers": 2}}"#;
    let session = |dir: &Path| -> Result<BTreeMap<String, Vec<u8>>, String> {
        fs::write(dir.join("grid.json"), grid).map_err(|e| e.to_string())?;
        run_in(dir, &["--seed", "7", "gen", "--kind", "random", "--n", "40", "-o", "tree.json"])?;
        run_in(dir, &["embed", "--tree", "tree.json", "--lambda", "1.3", "--realize-hnn"])?;
        run_in(dir, &["--seed", "3", "train", "--tree", "tree.json", "--model", "hnn", "--epochs", "5"])?;
        run_in(dir, &["train", "--tree", "tree.json", "--model", "mlp", "--epochs", "5"])?;
        run_in(dir, &["grid", "--config", "grid.json", "--svg"])?;
        run_in(dir, &["lowerbound", "--leaves", "2,4,8", "--restarts", "1", "--epochs", "5"])?;
        Ok(snapshot(dir))
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (session(a.path())?, session(b.path())?);
    check(first.keys().eq(second.keys()), || "different file sets".into())?;
    let differing: Vec<&String> = first.keys().filter(|k| first[*k] != second[*k]).collect();
    check(differing.is_empty(), || format!("differing outputs: {differing:?}"))?;
    Ok(format!("{} output files byte-identical across two runs", first.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "geometry kernel properties", criterion_1),
        (2, "binary(6) embedding within lambda 1.1", criterion_2),
        (3, "realized network size independent of lambda", criterion_3),
        (4, "HNN memorization", criterion_4),
        (5, "gradient check", criterion_5),
        (6, "desk grid ordering", criterion_6),
        (7, "distortion trend", criterion_7),
        (8, "determinism", criterion_8),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] criterion {id}: {name} ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] criterion {id}: {name} ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
