/// Cosine annealing: `lr0·½(1 + cos(π·step/max_steps))`.
pub fn cosine_lr(step: usize, max_steps: usize, lr0: f64) -> f64 {
    if max_steps == 0 {
        return lr0;
    }
    let t = step.min(max_steps) as f64 / max_steps as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}
