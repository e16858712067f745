use num_complex::Complex;

/// Floating scalar for the analytic layer: f32 or f64.
pub trait Real:
    num_traits::Float + num_traits::FloatConst + num_traits::FromPrimitive + std::fmt::Debug
{
}
impl Real for f32 {}
impl Real for f64 {}

/// Working precision for all shipped computations and tolerances.
pub type R = f64;
pub type Cx = Complex<R>;

/// e(x) = exp(2*pi*i*x).
pub fn e_of<T: Real>(x: T) -> Complex<T> {
    let two_pi = T::PI() + T::PI();
    Complex::from_polar(T::one(), two_pi * x)
}

/// e(num/den) for exact rational rotation, reduced before going to floats.
pub fn e_frac(num: i64, den: u64) -> Cx {
    debug_assert!(den > 0);
    let d = den as i64;
    let n = num.rem_euclid(d);
    e_of(n as R / d as R)
}
