//! Energy-modulated sets two ways: comparing modulated scores with the
//! global quantile, or base scores with a per-sample threshold.

use energy_cp::conformal::set_from_scores;
use energy_cp::rng::{streams, CounterRng};
use energy_cp::scores::{base_scores, draw_u, BaseScore, Modulation, ScoreParams};
use energy_cp::synth::{generate_synthetic, SynthConfig};
use energy_cp::calibrate;

fn main() -> energy_cp::Result<()> {
    let cal = generate_synthetic(&SynthConfig::new(30, 2000, 0))?;
    let test = generate_synthetic(&SynthConfig::new(30, 2000, 1))?;
    for base in BaseScore::ALL {
        let params = ScoreParams::new(base).with_modulation(Modulation::Energy);
        let pred = calibrate(&cal, &params, 0.1, 0)?;
        let rng = CounterRng::new(0, streams::TEST_U);
        let mut same = 0;
        for i in 0..test.len() {
            let u = draw_u(&params, rng, i);
            let theta = pred.sample_threshold(test.row(i))?;
            let via_threshold = set_from_scores(&base_scores(test.row(i), &params, u)?, theta);
            same += (via_threshold == pred.prediction_set(test.row(i), u)?) as usize;
        }
        println!("{:<11} qhat {:.6}: {same}/{} sets identical", params.variant_name(), pred.qhat, test.len());
    }
    Ok(())
}
