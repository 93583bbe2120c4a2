// temporary: scan phase seeds for gap persistence between L=2000 and L=4000
use qslab_core::potential::{BasisLabel, MultiIndex, PotentialShape, TorusPoint, TrigPolynomial};
use qslab_core::spectrum::{approximate_spectrum, OperatorConfig, PhaseMode};

fn main() {
    let shape = PotentialShape::new(1, 1).unwrap();
    let v = TrigPolynomial::from_labels(shape, &[(BasisLabel::Cos(MultiIndex::new(vec![1])), 1.0)]).unwrap();
    let cfg = OperatorConfig::new(v, vec![0.6180339887498949], 5.0, TorusPoint::origin(1)).unwrap();
    for seed in 0..24u64 {
        let small = approximate_spectrum(&cfg, 2000, 20, seed, PhaseMode::Random).unwrap().with_gaps(0.1).unwrap();
        let large = approximate_spectrum(&cfg, 4000, 20, seed, PhaseMode::Random).unwrap().with_gaps(0.1).unwrap();
        let mut moved = 0usize;
        let mut worst: f64 = 0.0;
        for g in &small.gaps {
            let best = large.gaps.iter().map(|g2| (g2.left - g.left).abs().max((g2.right - g.right).abs()))
                .fold(f64::INFINITY, f64::min);
            if best >= 0.02 { moved += 1; }
            worst = worst.max(best);
        }
        let pass = moved == 0 && !small.gaps.is_empty();
        println!("seed {seed}: gaps {}->{} moved {moved} worst-move {worst:.4} pass={pass}",
            small.gaps.len(), large.gaps.len());
    }
}
