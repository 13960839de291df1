//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrep_core::lstm::Lstm;
use segrep_core::{Graph, NodeId, ParamStore, Result, Tensor};

const H: f64 = 1e-5;
const TRIALS: usize = 100;
const TOL: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Inputs away from the kinks of relu and max, where central differences
/// are not meaningful.
fn smooth_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| loop {
            let x: f64 = rng.gen_range(-1.0..1.0);
            if x.abs() > 1e-3 {
                break x;
            }
        })
        .collect()
}

type Op = dyn Fn(&mut Graph<'_>, &[NodeId]) -> Result<NodeId>;

/// Reduces `op`'s output to a scalar with fixed random weights.
fn loss(op: &Op, inputs: &[Tensor], weights: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = op(&mut g, &ids).unwrap();
    let l = if g.value(out).is_scalar() {
        out
    } else {
        let w = g.constant(Tensor::vector(weights[..g.value(out).len()].to_vec()));
        g.dot(w, out).unwrap()
    };
    g.backward(l).unwrap();
    let grads = ids
        .iter()
        .map(|&id| g.grad(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; g.value(id).len()]))
        .collect();
    (g.scalar(l), grads)
}

fn check(name: &str, op: &Op, make: &dyn Fn(&mut ChaCha8Rng) -> Vec<Tensor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let inputs = make(&mut rng);
        let weights = random_vec(&mut rng, 64);
        let (_, analytic) = loss(op, &inputs, &weights);
        for (k, t) in inputs.iter().enumerate() {
            for i in 0..t.len() {
                let mut plus = inputs.clone();
                plus[k].data_mut()[i] += H;
                let mut minus = inputs.clone();
                minus[k].data_mut()[i] -= H;
                let numeric = (loss(op, &plus, &weights).0 - loss(op, &minus, &weights).0) / (2.0 * H);
                worst = worst.max(rel_err(analytic[k][i], numeric));
            }
        }
    }
    assert!(worst < TOL, "{name}: worst relative error {worst:e}");
}

fn vecs(rng: &mut ChaCha8Rng, lens: &[usize]) -> Vec<Tensor> {
    lens.iter().map(|&n| Tensor::vector(smooth_vec(rng, n))).collect()
}

#[test]
fn matvec() {
    check("matvec", &|g, x| g.matvec(x[0], x[1]), &|rng| {
        vec![Tensor::matrix(3, 4, random_vec(rng, 12)).unwrap(), Tensor::vector(random_vec(rng, 4))]
    });
}

#[test]
fn elementwise() {
    check("add", &|g, x| g.add(&[x[0], x[1], x[0]]), &|rng| vecs(rng, &[4, 4]));
    check("relu", &|g, x| Ok(g.relu(x[0])), &|rng| vecs(rng, &[5]));
    check("tanh", &|g, x| Ok(g.tanh(x[0])), &|rng| vecs(rng, &[5]));
    check("sigmoid", &|g, x| Ok(g.sigmoid(x[0])), &|rng| vecs(rng, &[5]));
    check("mul", &|g, x| g.mul(x[0], x[1]), &|rng| vecs(rng, &[4, 4]));
    check("scale", &|g, x| Ok(g.scale(x[0], -1.7)), &|rng| vecs(rng, &[3]));
    check("sum", &|g, x| Ok(g.sum(x[0])), &|rng| vecs(rng, &[3]));
    check("dot", &|g, x| g.dot(x[0], x[1]), &|rng| vecs(rng, &[4, 4]));
}

#[test]
fn max_away_from_ties() {
    check("max", &|g, x| g.max(x[0], x[1]), &|rng| loop {
        let v = vecs(rng, &[4, 4]);
        if v[0].data().iter().zip(v[1].data()).all(|(a, b)| (a - b).abs() > 1e-3) {
            break v;
        }
    });
}

#[test]
fn structural() {
    check("concat", &|g, x| g.concat(&[x[0], x[1]]), &|rng| vecs(rng, &[2, 3]));
    check("slice", &|g, x| g.slice(x[0], 1, 3), &|rng| vecs(rng, &[5]));
    check(
        "logsumexp",
        &|g, x| {
            let parts: Vec<NodeId> = (0..4).map(|i| g.slice(x[0], i, 1).unwrap()).collect();
            g.logsumexp(&parts)
        },
        &|rng| vecs(rng, &[4]),
    );
}

/// Plain-float LSTM used as an oracle for the graph implementation.
fn reference_lstm(wx: &Tensor, wh: &Tensor, b: &Tensor, xs: &[Tensor]) -> Vec<f64> {
    let k = wh.cols();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
    for x in xs {
        let z: Vec<f64> = (0..4 * k)
            .map(|r| {
                let a: f64 = wx.row(r).iter().zip(x.data()).map(|(w, v)| w * v).sum();
                let bh: f64 = wh.row(r).iter().zip(&h).map(|(w, v)| w * v).sum();
                a + bh + b.data()[r]
            })
            .collect();
        for j in 0..k {
            let (i, f, o, g) = (sig(z[j]), sig(z[k + j]), sig(z[2 * k + j]), z[3 * k + j].tanh());
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
    }
    h
}

#[test]
fn lstm_matches_reference_and_finite_differences() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lstm = Lstm::new(&mut store, "l", 3, 2, &mut rng).unwrap();
    let [wx, wh, b] = lstm.param_ids();
    for id in [wx, wh, b] {
        let data = random_vec(&mut rng, store.value(id).len());
        store.get_mut(id).value.data_mut().copy_from_slice(&data);
    }
    let xs: Vec<Tensor> = (0..3).map(|_| Tensor::vector(random_vec(&mut rng, 3))).collect();
    let weights = random_vec(&mut rng, 2);

    let eval = |store: &ParamStore, xs: &[Tensor]| -> (f64, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut g = Graph::with_params(store);
        let inputs: Vec<NodeId> = xs.iter().map(|t| g.variable(t.clone())).collect();
        let hs = lstm.run(&mut g, inputs.clone()).unwrap();
        let last = *hs.last().unwrap();
        let h = g.value(last).data().to_vec();
        let w = g.constant(Tensor::vector(weights.clone()));
        let l = g.dot(w, last).unwrap();
        g.backward(l).unwrap();
        let mut grads = segrep_core::Gradients::new();
        g.accumulate_into(&mut grads).unwrap();
        let per_param = lstm.param_ids().iter().map(|&id| grads.get(id).unwrap().to_vec()).collect();
        let per_input = inputs.iter().map(|&x| g.grad(x).unwrap().to_vec()).collect();
        (g.scalar(l), h, per_param, per_input)
    };

    let (_, h, d_params, d_inputs) = eval(&store, &xs);
    let expected = reference_lstm(store.value(wx), store.value(wh), store.value(b), &xs);
    for (a, e) in h.iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12);
    }

    let mut worst: f64 = 0.0;
    for (k, &id) in lstm.param_ids().iter().enumerate() {
        for i in 0..store.value(id).len() {
            let mut plus = store.clone();
            plus.get_mut(id).value.data_mut()[i] += H;
            let mut minus = store.clone();
            minus.get_mut(id).value.data_mut()[i] -= H;
            let numeric = (eval(&plus, &xs).0 - eval(&minus, &xs).0) / (2.0 * H);
            worst = worst.max(rel_err(d_params[k][i], numeric));
        }
    }
    for (k, x) in xs.iter().enumerate() {
        for i in 0..x.len() {
            let mut plus = xs.clone();
            plus[k].data_mut()[i] += H;
            let mut minus = xs.clone();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(&store, &plus).0 - eval(&store, &minus).0) / (2.0 * H);
            worst = worst.max(rel_err(d_inputs[k][i], numeric));
        }
    }
    assert!(worst < TOL, "lstm: worst relative error {worst:e}");
}
