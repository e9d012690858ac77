//! Classical fixed-step fourth-order Runge–Kutta.

use crate::scalar::Real;

/// One RK4 step of `dx/dt = f(x)` for an `N`-dimensional state.
#[inline]
pub fn rk4_step<T: Real, const N: usize>(x: &[T; N], dt: T, f: impl Fn(&[T; N]) -> [T; N]) -> [T; N] {
    let half = T::lit(0.5) * dt;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let k1 = f(x);
    let k2 = f(&std::array::from_fn(|i| x[i] + half * k1[i]));
    let k3 = f(&std::array::from_fn(|i| x[i] + half * k2[i]));
    let k4 = f(&std::array::from_fn(|i| x[i] + dt * k3[i]));
    std::array::from_fn(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
}

/// Integrate an autonomous field for `steps` steps, returning the final state.
pub fn integrate_fixed<T: Real, const N: usize>(
    x0: [T; N],
    dt: T,
    steps: usize,
    f: impl Fn(&[T; N]) -> [T; N],
) -> [T; N] {
    (0..steps).fold(x0, |x, _| rk4_step(&x, dt, &f))
}
