//! Differentiate a Gaussian policy's log-likelihood through the tape, check
//! one coordinate against a central difference, then take an Adam step.

use gsl::autodiff::heads::log_prob;
use gsl::autodiff::{adam_step, ActionBatch, AdamState, HeadKind, Matrix, MlpSpec, ParamVector, Tape};
use gsl::rng::rng_for;

fn nll(spec: &MlpSpec, params: &ParamVector, obs: &Matrix, actions: &ActionBatch) -> gsl::Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let set = tape.register(params);
    let x = tape.constant(obs.clone());
    let head = spec.forward_tape(&mut tape, set, params, x)?;
    let lp = log_prob(&mut tape, head, actions)?;
    let m = tape.mean(lp);
    let loss = tape.neg(m);
    Ok((tape.scalar(loss), tape.grad(loss, set)?))
}

fn main() -> gsl::Result<()> {
    let mut rng = rng_for(7, "autodiff-example");
    let spec = MlpSpec::new(
        3,
        vec![16, 16],
        HeadKind::Gaussian {
            dim: 2,
            min_std: 0.05,
            max_std: 1.0,
        },
    );
    let mut params = spec.init(&mut rng);
    println!("{} parameters", params.len());

    let obs = Matrix::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect());
    let actions = ActionBatch::Continuous(Matrix::from_vec(4, 2, vec![0.1, -0.2, 0.5, 0.3, -0.7, 0.0, 0.2, 0.9]));

    let (loss, grad) = nll(&spec, &params, &obs, &actions)?;
    // The last two entries are log-std, initialised on its upper clamp where
    // a central difference is one-sided; check the largest weight gradient.
    let i = grad[..grad.len() - 2]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let h = 1e-5;
    let mut shifted = params.clone();
    shifted.values[i] += h;
    let up = nll(&spec, &shifted, &obs, &actions)?.0;
    shifted.values[i] -= 2.0 * h;
    let down = nll(&spec, &shifted, &obs, &actions)?.0;
    println!(
        "loss {loss:.6}; d/dθ[{i}] tape {:.8} vs numeric {:.8}",
        grad[i],
        (up - down) / (2.0 * h)
    );

    let mut opt = AdamState::for_params(&params);
    for step in 0..200 {
        let (l, g) = nll(&spec, &params, &obs, &actions)?;
        adam_step(&mut params, &g, &mut opt, 1e-2)?;
        spec.project(&mut params);
        if step % 50 == 0 {
            println!("step {step:>3}: negative log-likelihood {l:.4}");
        }
    }
    Ok(())
}
