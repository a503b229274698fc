use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shine::numerics::{gradient_check, gradient_check_params, Graph, ParamStore, Tensor};
use shine::tasks::{
    distill_loss, distill_loss_graph, ner_forward, ner_loss, ner_loss_graph, pair_forward, pair_loss, pair_loss_graph,
    total_loss, NerHead, PairHead,
};

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
    Tensor::from_rows(rows, cols, data).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let mut t = random(rng, rows, cols).map(f64::exp);
    for r in 0..rows {
        let s: f64 = t.row(r).iter().sum();
        for v in t.row_mut(r) {
            *v /= s;
        }
    }
    t
}

#[test]
fn ner_loss_matches_reference_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (l, k) = (rng.random_range(1..9), rng.random_range(2..8));
        let p = random_probs(&mut rng, l, k);
        let gold: Vec<usize> = (0..l).map(|_| rng.random_range(0..k)).collect();
        let want = -gold.iter().enumerate().map(|(i, &y)| p.get(i, y).ln()).sum::<f64>() / l as f64;
        assert!((ner_loss(&p, &gold).unwrap() - want).abs() < 1e-12);
    }
    let mut onehot = Tensor::zeros(2, 3);
    onehot.set(0, 2, 1.0);
    onehot.set(1, 0, 1.0);
    assert!(ner_loss(&onehot, &[2, 0]).unwrap() <= 1e-12);
}

#[test]
fn more_gold_mass_means_lower_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let k = rng.random_range(2..6);
        let p = random_probs(&mut rng, 1, k);
        let y = rng.random_range(0..k);
        let t = rng.random_range(0.05..0.95);
        let mut q = p.clone();
        let old = p.get(0, y);
        let new = old + t * (1.0 - old);
        for j in 0..k {
            let v = if j == y { new } else { p.get(0, j) * (1.0 - new) / (1.0 - old) };
            q.set(0, j, v);
        }
        assert!(ner_loss(&q, &[y]).unwrap() < ner_loss(&p, &[y]).unwrap());
    }
}

#[test]
fn pair_loss_matches_reference_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut all = Vec::new();
    let mut gold = Vec::new();
    let mut want = 0.0;
    for _mention in 0..3 {
        for _candidate in 0..4 {
            let p = random_probs(&mut rng, 1, 5);
            let y = rng.random_range(0..5);
            want -= p.get(0, y).ln();
            all.push(p);
            gold.push(y);
        }
    }
    assert!((pair_loss(&all, &gold).unwrap() - want).abs() < 1e-12);
    let exact: Vec<Tensor> = gold
        .iter()
        .map(|&y| {
            let mut t = Tensor::zeros(1, 5);
            t.set(0, y, 1.0);
            t
        })
        .collect();
    assert!(pair_loss(&exact, &gold).unwrap().abs() < 1e-12);
}

#[test]
fn distill_is_symmetric_and_zero_on_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (l, k) = (rng.random_range(1..7), rng.random_range(2..6));
        let (a, b) = (random_probs(&mut rng, l, k), random_probs(&mut rng, l, k));
        let want = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (l * k) as f64;
        assert!((distill_loss(&a, &b).unwrap() - want).abs() < 1e-15);
        assert_eq!(distill_loss(&a, &b).unwrap(), distill_loss(&b, &a).unwrap());
        assert_eq!(distill_loss(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn total_loss_is_linear_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (t, i) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let (a0, a1) = (total_loss(t, i, 0.0).unwrap(), total_loss(t, i, 1.0).unwrap());
        let a = rng.random_range(0.0..20.0);
        assert!((total_loss(t, i, a).unwrap() - (a0 + a * (a1 - a0))).abs() < 1e-12);
    }
}

#[test]
fn loss_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for l in [1, 4, 8] {
        let logits = random(&mut rng, l, 5);
        let gold: Vec<usize> = (0..l).map(|_| rng.random_range(0..5)).collect();
        let r = gradient_check(
            |g, v| {
                let p = g.softmax(v[0])?;
                ner_loss_graph(g, p, &gold)
            },
            &[logits],
            1e-4,
        )
        .unwrap();
        assert!(r.passed(), "ner {r:?}");

        let pair_logits = [random(&mut rng, 1, 4), random(&mut rng, 1, 4)];
        let r = gradient_check(
            |g, v| {
                let a = g.softmax(v[0])?;
                let b = g.softmax(v[1])?;
                pair_loss_graph(g, &[a, b], &[0, 3])
            },
            &pair_logits,
            1e-4,
        )
        .unwrap();
        assert!(r.passed(), "pair {r:?}");

        let pads = l + 2;
        let r = gradient_check(
            |g, v| {
                let t = g.softmax(v[0])?;
                let s = g.softmax(v[1])?;
                distill_loss_graph(g, t, s, l)
            },
            &[random(&mut rng, pads, 3), random(&mut rng, pads, 3)],
            1e-4,
        )
        .unwrap();
        assert!(r.passed(), "distill {r:?}");
    }
}

#[test]
fn heads_are_differentiable_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let ner = NerHead::register(&mut store, 6, vec!["O".into(), "B-X".into(), "I-X".into()], &mut rng).unwrap();
    let pair = PairHead::register(&mut store, 6, vec!["None".into(), "r".into(), "s".into()], &mut rng).unwrap();
    let h = store.insert("input.h_f", random(&mut rng, 5, 6)).unwrap();
    let r = gradient_check_params(
        |g| {
            let hv = g.param(h);
            let p = ner_forward(g, hv, &ner)?;
            let a = ner_loss_graph(g, p, &[0, 1, 2, 0, 1])?;
            let q1 = pair_forward(g, hv, (0, 1), (3, 4), 5, &pair)?;
            let q2 = pair_forward(g, hv, (3, 4), (0, 1), 5, &pair)?;
            let b = pair_loss_graph(g, &[q1, q2], &[1, 0])?;
            g.add(a, b)
        },
        &store,
        1e-4,
    )
    .unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn pair_prediction_depends_on_argument_order_only_through_slots() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let pair = PairHead::register(&mut store, 4, vec!["None".into(), "r".into()], &mut rng).unwrap();
    let h = random(&mut rng, 6, 4);
    let mut g = Graph::new(&store);
    let hv = g.input(h.clone()).unwrap();
    let a = pair_forward(&mut g, hv, (0, 0), (2, 3), 4, &pair).unwrap();
    let b = pair_forward(&mut g, hv, (2, 3), (0, 0), 4, &pair).unwrap();
    assert!(g.value(a).max_abs_diff(g.value(b)) > 0.0);
    assert!((g.value(a).data().iter().sum::<f64>() - 1.0).abs() < 1e-9);

    // Rows past the real length are never pooled.
    let mut other = h.clone();
    other.row_mut(4).fill(50.0);
    other.row_mut(5).fill(-50.0);
    let ov = g.input(other).unwrap();
    let c = pair_forward(&mut g, ov, (0, 0), (2, 3), 4, &pair).unwrap();
    assert_eq!(g.value(a), g.value(c));
}
