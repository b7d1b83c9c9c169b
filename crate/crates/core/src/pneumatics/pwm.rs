/// Proportional pump duty: `(p_target − p_cur)·kp + pwm_min`, clamped to
/// `[0, 1]`, and zero once the current pressure reaches the target.
pub fn pwm_controller(p_target: f64, p_cur: f64, kp: f64, pwm_min: f64) -> f64 {
    if !(p_cur < p_target) {
        return 0.0;
    }
    ((p_target - p_cur) * kp + pwm_min).clamp(0.0, 1.0)
}
