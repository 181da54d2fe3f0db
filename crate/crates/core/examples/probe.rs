use hillsaddle::hill::ReducedToggleParams;
use hillsaddle::saddle::{classify_parameter, SaddleConfig};

fn main() {
    let cfg = SaddleConfig::<f64>::default();
    let fixtures = [
        ("region5-asym", [0.5, 1.0, 1.0, 0.4, 1.2]),
        ("region5-symmetric", [0.5, 1.0, 1.0, 0.5, 1.0]),
        ("region7", [0.3, 0.5, 2.0, 0.1, 0.2]),
        ("region1", [2.0, 1.0, 1.0, 0.1, 0.2]),
        ("hysteresis", [0.9243, 0.0506, 0.8125, 0.0779, 0.8161]),
        ("isola", [0.6470, 0.3279, 0.9445, 0.5301, 0.3908]),
    ];
    for (name, c) in fixtures {
        let params = ReducedToggleParams::new(c[0], c[1], c[2], c[3], c[4], 1.0);
        let t0 = std::time::Instant::now();
        let out = classify_parameter(&params, &cfg).unwrap();
        println!(
            "{:18} saddles={} bad={} multiple={} [{} ms]",
            name,
            out.saddles.len(),
            out.bad_candidates.len(),
            out.multiple,
            t0.elapsed().as_millis()
        );
        for s in &out.saddles {
            println!(
                "    d={:.4} x={:?} |G|={:.2e} |lam|min={:.2e} v={:?}",
                s.d, s.x, s.residual, s.smallest_eigenvalue, s.v
            );
        }
        for b in &out.bad_candidates {
            println!("    bad at s={:.4}: {:?}", b.s, b.reason);
        }
    }
}
