use hrma_core::strip::*;
use std::f64::consts::PI;

fn main() {
    for (l, n) in [(40.0, 4096usize), (80.0, 1024), (80.0, 4096)] {
        let cfg = PwConfig { band: PwBand::Absolute { lo: 0.6, hi: 6.0 }, ..PwConfig::default() };
        let f = LineFn::sample(l, n, Taper::None, |t| (2.0 / PI) / (t * t + 4.0)).unwrap();
        let rep = pw_test(&f, 1.5, &cfg).unwrap();
        let g = LineFn::sample(l, n, Taper::None, |t| 1.0 / (1.0 + t * t)).unwrap();
        let rg = pw_test(&g, 0.5, &cfg).unwrap();
        println!("L={l} N={n}: kernel rate {:.4} (want 2), slow rate {:.4} (want 1)", rep.fitted_rate, rg.fitted_rate);
    }
}
