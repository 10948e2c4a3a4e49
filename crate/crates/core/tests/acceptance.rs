//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `cargo test --test acceptance -- --nocapture` to
//! see them).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ditree::info::{
    build_weights, gaussian_di, gaussian_kl, tree_to_gaussian, WeightKind, WeightMatrix,
};
use ditree::linalg::SymMatrix;
use ditree::model::{
    build_covariance, sample, CovarianceMatrix, GenerativeModel, ModelFile, ProcessLayout,
};
use ditree::trees::{
    best_causal_tree, count_dependencies, enumerate_causal_trees, kruskal_max_tree,
    DependencyKind, ProcessTree,
};

fn random_model(m: usize, n: usize, seed: u64) -> GenerativeModel {
    let layout = ProcessLayout::new(m, n).unwrap();
    let d = layout.var_count();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0; d * d];
    for t in 1..n {
        for to_p in 0..m {
            for from_p in 0..m {
                if rng.gen_bool(0.55) {
                    let to = layout.flat(to_p, t);
                    let from = layout.flat(from_p, t - 1);
                    coeffs[to * d + from] = rng.gen_range(-0.8..0.8);
                }
            }
        }
    }
    let noise: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
    GenerativeModel::new(layout, coeffs, noise).unwrap()
}

fn random_covariance_n1(m: usize, seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut lower = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            lower[i * m + j] = if i == j {
                rng.gen_range(0.6..1.4)
            } else {
                rng.gen_range(-0.8..0.8)
            };
        }
    }
    let sigma = SymMatrix::from_fn(m, |i, j| {
        (0..m).map(|k| lower[i * m + k] * lower[j * m + k]).sum()
    });
    CovarianceMatrix::new(ProcessLayout::new(m, 1).unwrap(), sigma).unwrap()
}

/// Criterion 1: on random strictly-causal models, the tree maximizing the
/// summed pairwise directed informations is the tree minimizing the KL
/// divergence of its materialized approximation, over every rooted tree.
#[test]
fn criterion_1_best_di_tree_is_argmin_kl_tree() {
    let start = Instant::now();
    for trial in 0..50u64 {
        let m = 3 + (trial as usize) % 2;
        let n = 2 + ((trial as usize) / 2) % 2;
        let cov = build_covariance(&random_model(m, n, 1000 + trial)).unwrap();
        let weights = build_weights(&cov, WeightKind::ProcessDi).unwrap();
        let learned = best_causal_tree(&weights).unwrap();
        let learned_kl =
            gaussian_kl(&cov, &tree_to_gaussian(&cov, &learned).unwrap()).unwrap();

        let mut best: Option<(f64, ProcessTree)> = None;
        let mut near_optimal = 0usize;
        let mut count = 0usize;
        for tree in enumerate_causal_trees(m).unwrap() {
            count += 1;
            let kl = gaussian_kl(&cov, &tree_to_gaussian(&cov, &tree).unwrap()).unwrap();
            match &best {
                None => best = Some((kl, tree)),
                Some((b, _)) if kl < *b => best = Some((kl, tree)),
                _ => {}
            }
        }
        assert_eq!(count, m.pow(m as u32 - 1));
        let (min_kl, argmin) = best.unwrap();
        for tree in enumerate_causal_trees(m).unwrap() {
            let kl = gaussian_kl(&cov, &tree_to_gaussian(&cov, &tree).unwrap()).unwrap();
            if kl - min_kl <= 1e-9 {
                near_optimal += 1;
            }
        }
        if near_optimal == 1 {
            assert_eq!(
                (learned.root(), learned.edges()),
                (argmin.root(), argmin.edges()),
                "trial {trial}: unique optimum, structures differ"
            );
        }
        assert!(
            learned_kl - min_kl <= 1e-9,
            "trial {trial}: learned KL {learned_kl} vs brute-force min {min_kl}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("criterion 1: PASS — summed-DI argmax equals argmin-KL tree on 50 models ({elapsed:?})");
}

/// Criterion 2: the same equivalence at the variable level — Kruskal on
/// variable mutual informations against every undirected spanning tree.
#[test]
fn criterion_2_kruskal_is_argmin_kl_over_spanning_trees() {
    let start = Instant::now();
    let shapes = [(2usize, 2usize), (3, 2), (2, 3), (5, 1), (6, 1)];
    for trial in 0..50u64 {
        let (m, n) = shapes[(trial as usize) % shapes.len()];
        let cov = if n == 1 {
            random_covariance_n1(m, 2000 + trial)
        } else {
            build_covariance(&random_model(m, n, 2000 + trial)).unwrap()
        };
        let d = cov.dim();
        assert!(d <= 6);
        let weights = build_weights(&cov, WeightKind::VariableMi).unwrap();
        let learned = kruskal_max_tree(&weights).unwrap();
        let learned_kl =
            gaussian_kl(&cov, &tree_to_gaussian(&cov, &learned).unwrap()).unwrap();

        // Every undirected spanning tree, via rooted enumeration at 0.
        let mut min_kl = f64::INFINITY;
        let mut argmin: Option<ProcessTree> = None;
        let mut trees = 0usize;
        for rooted in enumerate_causal_trees(d).unwrap() {
            if rooted.root() != Some(0) {
                continue;
            }
            trees += 1;
            let undirected = ProcessTree::from_parents(
                false,
                (0..d).map(|v| rooted.parent_of(v)).collect(),
                0.0,
            )
            .unwrap();
            let kl =
                gaussian_kl(&cov, &tree_to_gaussian(&cov, &undirected).unwrap()).unwrap();
            if kl < min_kl {
                min_kl = kl;
                argmin = Some(undirected);
            }
        }
        assert_eq!(trees, d.pow(d as u32 - 2), "labeled tree count");

        let margin_unique = {
            let mut close = 0;
            for rooted in enumerate_causal_trees(d).unwrap() {
                if rooted.root() != Some(0) {
                    continue;
                }
                let undirected = ProcessTree::from_parents(
                    false,
                    (0..d).map(|v| rooted.parent_of(v)).collect(),
                    0.0,
                )
                .unwrap();
                let kl = gaussian_kl(&cov, &tree_to_gaussian(&cov, &undirected).unwrap())
                    .unwrap();
                if kl - min_kl <= 1e-9 {
                    close += 1;
                }
            }
            close == 1
        };
        if margin_unique {
            assert_eq!(
                learned.skeleton(),
                argmin.unwrap().skeleton(),
                "trial {trial}: unique optimum, skeletons differ"
            );
        }
        assert!(
            learned_kl - min_kl <= 1e-9,
            "trial {trial}: Kruskal KL {learned_kl} vs brute-force min {min_kl}"
        );
    }
    let elapsed = start.elapsed();
    println!("criterion 2: PASS — Kruskal equals argmin-KL spanning tree on 50 models ({elapsed:?})");
}

/// Criterion 3: with a single timestep the directed optimizer reduces to
/// the undirected one — same skeleton, same total score.
#[test]
fn criterion_3_single_step_reduces_to_undirected_case() {
    for trial in 0..20u64 {
        let m = 3 + (trial as usize) % 4; // 3..=6
        let cov = random_covariance_n1(m, 3000 + trial);
        let di = build_weights(&cov, WeightKind::ProcessDi).unwrap();
        let mi = build_weights(&cov, WeightKind::ProcessMi).unwrap();
        let causal = best_causal_tree(&di).unwrap();
        let chowliu = kruskal_max_tree(&mi).unwrap();
        assert_eq!(
            causal.skeleton(),
            chowliu.skeleton(),
            "trial {trial}: skeletons differ at n=1"
        );
        assert!(
            (causal.score() - chowliu.score()).abs() <= 1e-9,
            "trial {trial}: scores {} vs {}",
            causal.score(),
            chowliu.score()
        );
    }
    println!("criterion 3: PASS — n=1 directed tree matches the undirected tree on 20 models");
}

fn random_rooted_process_tree(m: usize, rng: &mut ChaCha12Rng) -> ProcessTree {
    // Uniform labeled tree by Prüfer decoding, rooted at a uniform node.
    let mut degree = vec![1usize; m];
    let prufer: Vec<usize> = (0..m - 2).map(|_| rng.gen_range(0..m)).collect();
    for &v in &prufer {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(m - 1);
    let mut degree_now = degree.clone();
    for &v in &prufer {
        let leaf = (0..m).find(|&u| degree_now[u] == 1).unwrap();
        edges.push((leaf, v));
        degree_now[leaf] -= 1;
        degree_now[v] -= 1;
    }
    let remaining: Vec<usize> = (0..m).filter(|&u| degree_now[u] == 1).collect();
    edges.push((remaining[0], remaining[1]));

    let root = rng.gen_range(0..m);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m];
    for &(a, b) in &edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut parent = vec![None; m];
    let mut seen = vec![false; m];
    seen[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &u in &adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                parent[u] = Some(v);
                queue.push_back(u);
            }
        }
    }
    ProcessTree::from_parents(true, parent, 0.0).unwrap()
}

/// Criterion 4: when the generative coupling graph is itself a rooted tree
/// over processes (lag-1 coefficients in [0.6, 0.9], unit noise, m=6,
/// n=10), the optimizer recovers the true directed edge set in at least 95
/// of 100 trials, and the recovered approximation is KL-exact.
#[test]
fn criterion_4_exact_recovery_of_tree_structured_models() {
    let (m, n) = (6usize, 10usize);
    let layout = ProcessLayout::new(m, n).unwrap();
    let d = layout.var_count();
    let mut rng = ChaCha12Rng::seed_from_u64(0xd15e);
    let mut recovered = 0usize;
    for trial in 0..100 {
        let truth = random_rooted_process_tree(m, &mut rng);
        let mut coeffs = vec![0.0; d * d];
        for (p, c) in truth.edges() {
            let coeff = rng.gen_range(0.6..0.9);
            for t in 1..n {
                coeffs[layout.flat(c, t) * d + layout.flat(p, t - 1)] = coeff;
            }
        }
        let model = GenerativeModel::new(layout, coeffs, vec![1.0; d]).unwrap();
        let cov = build_covariance(&model).unwrap();
        let weights = build_weights(&cov, WeightKind::ProcessDi).unwrap();
        let learned = best_causal_tree(&weights).unwrap();
        if learned.edges() == truth.edges() {
            recovered += 1;
            let approx = tree_to_gaussian(&cov, &learned).unwrap();
            let kl = gaussian_kl(&cov, &approx).unwrap();
            assert!(
                kl <= 1e-6,
                "trial {trial}: recovered structure but KL = {kl}"
            );
        }
    }
    assert!(recovered >= 95, "recovered only {recovered} of 100");
    println!("criterion 4: PASS — exact structure recovery in {recovered}/100 trials, KL ≤ 1e-6 when recovered");
}

/// Criterion 5: dependency counts at m=6, n=10 — 1770 for the full joint,
/// 59 for a variable-level spanning tree, and 545 for the causal tree by
/// the present-inclusive closed form (a strictly-past variant gives 495;
/// both numbers are reported by the count subcommand and the docs).
#[test]
fn criterion_5_dependency_counts() {
    assert_eq!(count_dependencies(6, 10, DependencyKind::Full), 1770);
    assert_eq!(count_dependencies(6, 10, DependencyKind::ChowLiuVar), 59);
    assert_eq!(count_dependencies(6, 10, DependencyKind::Causal), 545);
    let strictly_past = 6 * (10 * 9 / 2) + 5 * (10 * 9 / 2);
    assert_eq!(strictly_past, 495);
    println!("criterion 5: PASS — counts 1770 / 59 / 545 (strictly-past variant 495 documented)");
}

fn load_shipped_model(name: &str) -> GenerativeModel {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/");
    let text = std::fs::read_to_string(format!("{path}{name}")).unwrap();
    ModelFile::from_json(&text).unwrap().into_model().unwrap()
}

/// Criterion 6: on the shipped reconstruction pair at 10 000 trials and
/// seed 0, the three scorers' AUCs are strictly ordered with gaps of at
/// least 0.01, and every curve satisfies the ROC invariants.
#[test]
fn criterion_6_roc_ordering_on_shipped_models() {
    let start = Instant::now();
    let m0 = load_shipped_model("h0.json");
    let m1 = load_shipped_model("h1.json");
    let result = ditree::hypothesis::run_experiment(&m0, &m1, 10_000, 0).unwrap();
    for curve in result.curves() {
        curve.validate().unwrap();
    }
    let (full, causal, chowliu) = (result.full.auc, result.causal.auc, result.chowliu.auc);
    assert!(
        full - causal >= 0.01,
        "AUC(full) {full} vs AUC(causal) {causal}"
    );
    assert!(
        causal - chowliu >= 0.01,
        "AUC(causal) {causal} vs AUC(chowliu) {chowliu}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    println!(
        "criterion 6: PASS — AUC full {full:.4} > causal {causal:.4} > chowliu {chowliu:.4} ({elapsed:?})"
    );
}

/// Criterion 6 companion: the learned causal tree of the first shipped
/// model only uses edges whose direction agrees with the generative
/// arrows (every learned edge runs from an ancestor toward a descendant).
#[test]
fn criterion_6_learned_tree_respects_generative_directions() {
    let model = load_shipped_model("h0.json");
    let cov = build_covariance(&model).unwrap();
    let weights = build_weights(&cov, WeightKind::ProcessDi).unwrap();
    let tree = best_causal_tree(&weights).unwrap();

    let m = model.layout().processes();
    let mut reach = vec![vec![false; m]; m];
    for (dst, row) in (0..m).map(|dst| (dst, model.driving_processes(dst))) {
        for src in row {
            reach[src][dst] = true;
        }
    }
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
            }
        }
    }
    for (p, c) in tree.edges() {
        assert!(
            reach[p][c],
            "learned edge {p}→{c} contradicts the generative arrows"
        );
    }
    println!("criterion 6b: PASS — learned tree directions consistent with generative ancestry");
}

/// Criterion 7a: the telescoped DI formula agrees with the per-step
/// conditional mutual information oracle on 50 random models.
#[test]
fn criterion_7a_di_matches_conditional_mi_oracle() {
    let log_cond_var = |cov: &CovarianceMatrix, v: usize, s: &[usize]| -> f64 {
        let mat = cov.matrix();
        let mut joint = s.to_vec();
        joint.push(v);
        let num = mat.submatrix(&joint).unwrap().log_det().unwrap();
        let den = if s.is_empty() {
            0.0
        } else {
            mat.submatrix(s).unwrap().log_det().unwrap()
        };
        num - den
    };
    let mut rng = ChaCha12Rng::seed_from_u64(0x0c1e);
    for trial in 0..50u64 {
        let m = rng.gen_range(2..=4);
        let n = rng.gen_range(2..=5);
        let cov = build_covariance(&random_model(m, n, 7000 + trial)).unwrap();
        let layout = cov.layout();
        for src in 0..m {
            for dst in 0..m {
                if src == dst {
                    continue;
                }
                let direct = gaussian_di(&cov, src, dst).unwrap();
                let mut oracle = 0.0;
                for i in 1..=n {
                    let y_i = layout.flat(dst, i - 1);
                    let y_past = layout.process_prefix(dst, i - 1);
                    let mut with_src = y_past.clone();
                    with_src.extend(layout.process_prefix(src, i));
                    oracle += 0.5
                        * (log_cond_var(&cov, y_i, &y_past)
                            - log_cond_var(&cov, y_i, &with_src));
                }
                assert!(
                    (direct - oracle.max(0.0)).abs() <= 1e-8,
                    "trial {trial}: DI({src}→{dst}) {direct} vs oracle {oracle}"
                );
            }
        }
    }
    println!("criterion 7a: PASS — DI matches the per-step conditional-MI oracle on 50 models");
}

/// Criterion 7b: log-determinants match cofactor expansion at dim ≤ 4.
#[test]
fn criterion_7b_log_det_matches_cofactor_expansion() {
    fn cofactor_det(entries: &[f64], n: usize) -> f64 {
        if n == 1 {
            return entries[0];
        }
        let mut det = 0.0;
        for col in 0..n {
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for r in 1..n {
                for c in 0..n {
                    if c != col {
                        minor.push(entries[r * n + c]);
                    }
                }
            }
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * entries[col] * cofactor_det(&minor, n - 1);
        }
        det
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x10de7);
    for _ in 0..50 {
        let dim = rng.gen_range(1..=4);
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                lower[i * dim + j] = if i == j {
                    rng.gen_range(0.5..2.0)
                } else {
                    rng.gen_range(-1.0..1.0)
                };
            }
        }
        let m = SymMatrix::from_fn(dim, |i, j| {
            (0..dim).map(|k| lower[i * dim + k] * lower[j * dim + k]).sum()
        });
        let ld = m.log_det().unwrap();
        let oracle = cofactor_det(m.entries(), dim).ln();
        assert!(
            (ld - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
            "dim {dim}: log_det {ld} vs cofactor {oracle}"
        );
    }
    println!("criterion 7b: PASS — log-determinant matches cofactor expansion at dim ≤ 4");
}

/// Criterion 7c: the analytic covariance matches the Monte-Carlo estimate
/// from one million draws within 2% relative on every sizable entry.
#[test]
fn criterion_7c_monte_carlo_covariance_check() {
    let layout = ProcessLayout::new(2, 3).unwrap();
    let d = layout.var_count();
    let mut coeffs = vec![0.0; d * d];
    let arrows = [
        ((0usize, 1usize), (0usize, 0usize), 0.7),
        ((0, 2), (0, 1), 0.7),
        ((1, 1), (0, 0), 0.6),
        ((1, 2), (1, 1), 0.5),
        ((1, 2), (0, 1), 0.4),
    ];
    for ((pi, ti), (pj, tj), c) in arrows {
        coeffs[layout.flat(pi, ti) * d + layout.flat(pj, tj)] = c;
    }
    let model = GenerativeModel::new(layout, coeffs, vec![1.0; d]).unwrap();
    let analytic = build_covariance(&model).unwrap();

    let count = 1_000_000usize;
    let samples = sample(&model, 2024, count);
    let mut checked = 0;
    for i in 0..d {
        for j in 0..=i {
            let emp: f64 =
                samples.rows().map(|r| r[i] * r[j]).sum::<f64>() / count as f64;
            let truth = analytic.matrix().get(i, j);
            if truth.abs() > 0.1 {
                checked += 1;
                assert!(
                    (emp - truth).abs() <= 0.02 * truth.abs(),
                    "entry ({i},{j}): empirical {emp} vs analytic {truth}"
                );
            }
        }
    }
    assert!(checked >= 10, "model too sparse to exercise the check");
    println!("criterion 7c: PASS — 10⁶-draw covariance within 2% on {checked} entries");
}

/// Criterion 8: root-enumerated arborescence search scales at most
/// cubically on precomputed weight matrices (log-log slope ≤ 3.3 from
/// m=20 to m=160) and m=50 finishes well under a second.
#[test]
fn criterion_8_cubic_scaling_of_root_enumeration() {
    fn random_weights(size: usize, seed: u64) -> WeightMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; size * size];
        for r in 0..size {
            for c in 0..size {
                if r != c {
                    weights[r * size + c] = rng.gen_range(0.0..1.0);
                }
            }
        }
        let labels = (0..size).map(|p| format!("p{p}")).collect();
        WeightMatrix::from_parts(WeightKind::ProcessDi, labels, weights).unwrap()
    }

    fn time_per_call(w: &WeightMatrix) -> f64 {
        // Warm up, then repeat until the measurement is long enough to
        // be trustworthy.
        best_causal_tree(w).unwrap();
        let mut reps = 1usize;
        loop {
            let start = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(best_causal_tree(std::hint::black_box(w)).unwrap());
            }
            let elapsed = start.elapsed().as_secs_f64();
            if elapsed >= 0.2 {
                return elapsed / reps as f64;
            }
            reps *= 2;
        }
    }

    let t20 = time_per_call(&random_weights(20, 1));
    let t160 = time_per_call(&random_weights(160, 2));
    let slope = (t160 / t20).ln() / (160.0f64 / 20.0).ln();
    assert!(
        slope <= 3.3,
        "log-log slope {slope:.2} exceeds 3.3 (t20 {t20:.2e}s, t160 {t160:.2e}s)"
    );

    let w50 = random_weights(50, 3);
    let start = Instant::now();
    std::hint::black_box(best_causal_tree(&w50).unwrap());
    let t50 = start.elapsed();
    assert!(t50.as_secs_f64() < 1.0, "m=50 took {t50:?}");
    println!(
        "criterion 8: PASS — slope {slope:.2} ≤ 3.3 (t20 {t20:.2e}s, t160 {t160:.2e}s), m=50 in {t50:?}"
    );
}
