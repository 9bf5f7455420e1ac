//! Floating point scalars used for sampled values.
use std::collections::HashMap;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::{Fft, FftNum, FftPlanner};

/// Sample precision; implemented for `f32` and `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Shared FFT plan for a transform length.
    fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>>;
}

type PlanCache<T> = Mutex<(FftPlanner<T>, HashMap<(usize, bool), Arc<dyn Fft<T>>>)>;

fn cached<T: FftNum>(cache: &'static OnceLock<PlanCache<T>>, len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let m = cache.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = m.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((len, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

static PLANS_F32: OnceLock<PlanCache<f32>> = OnceLock::new();
static PLANS_F64: OnceLock<PlanCache<f64>> = OnceLock::new();

impl Real for f32 {
    fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>> {
        cached(&PLANS_F32, len, inverse)
    }
}

impl Real for f64 {
    fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>> {
        cached(&PLANS_F64, len, inverse)
    }
}
