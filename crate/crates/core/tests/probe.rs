// temporary diagnostics
use zsl_core::cvae::{synthesize_semantic, train_cvae, CvaeConfig, CvaeModel};
use zsl_core::data::synth::{generate_synthetic, SynthSpec};
use zsl_core::rng::RunRng;

fn mean_gap(m: &CvaeModel, ds: &zsl_core::data::Dataset) -> f64 {
    let rows = &ds.splits().seen_train;
    let x = ds.visual().select_rows(rows);
    let (mu, _) = m.encode(&x).unwrap();
    let mut gap = 0.0;
    for (i, &r) in rows.iter().enumerate() {
        let a = ds.prototypes().row(ds.labels()[r]);
        gap += mu.row(i).iter().zip(a).map(|(&u, &v)| (u - v) * (u - v)).sum::<f64>();
    }
    gap / rows.len() as f64
}

fn nearest_proto_hit_rate(m: &CvaeModel, ds: &zsl_core::data::Dataset) -> f64 {
    let rows = &ds.splits().unseen_test;
    let x = ds.visual().select_rows(rows);
    let synth = synthesize_semantic(&m, &x).unwrap();
    let mut hits = 0;
    for (i, &r) in rows.iter().enumerate() {
        let mut best = (f64::INFINITY, 0usize);
        for c in 0..ds.n_classes() {
            let d: f64 = synth.row(i).iter().zip(ds.prototypes().row(c)).map(|(&u, &v)| (u - v) * (u - v)).sum();
            if d < best.0 { best = (d, c); }
        }
        if best.1 == ds.labels()[r] { hits += 1; }
    }
    hits as f64 / rows.len() as f64
}

#[test]
fn probe_cvae() {
    let ds = generate_synthetic(&SynthSpec::default()).unwrap();
    for &(lr, epochs, hidden) in &[(1e-3, 100, 32), (2e-3, 200, 32), (5e-3, 200, 32), (1e-2, 400, 32), (2e-3, 400, 64), (5e-3, 400, 64)] {
        let rng = RunRng::new(3);
        let mut m = CvaeModel::new(ds.visual_dim(), ds.proto_dim(), hidden, &rng);
        let before = mean_gap(&m, &ds);
        let cfg = CvaeConfig { epochs, hidden, learning_rate: lr, batch_size: 64 };
        let hist = train_cvae(&mut m, &ds, &cfg, &rng).unwrap();
        println!(
            "lr {:7.0e} epochs {:3} hidden {:2} | gap {:9.1} -> {:8.3} | loss {:11.1} -> {:9.2} | unseen nearest-proto {:.3}",
            lr, epochs, hidden, before, mean_gap(&m, &ds), hist[0].loss, hist.last().unwrap().loss, nearest_proto_hit_rate(&m, &ds)
        );
    }
}
