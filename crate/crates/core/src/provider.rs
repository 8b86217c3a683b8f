//! Source of jointly scaled, rounded series.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{ModelError, ProviderError};
use crate::model::{int, InterestSeries, Peak, Precision, QueryId, RequestSpec, ResponseId, SCALE_MAX};

/// All series returned by one request, scaled together.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProviderResponse {
    request: RequestSpec,
    series: Vec<InterestSeries>,
    response_id: ResponseId,
}

impl ProviderResponse {
    /// Checks one series per requested query (in request order) and a
    /// common precision, then tags every series with the response id and
    /// its relation to the scale maximum.
    pub fn new(
        request: RequestSpec,
        mut series: Vec<InterestSeries>,
        response_id: ResponseId,
    ) -> Result<Self, ModelError> {
        if series.len() != request.queries().len() {
            return Err(ModelError::SeriesCount {
                expected: request.queries().len(),
                got: series.len(),
            });
        }
        for (s, q) in series.iter().zip(request.queries()) {
            if s.query() != q {
                return Err(ModelError::SeriesOrder {
                    expected: q.clone(),
                    found: s.query().clone(),
                });
            }
        }
        let precision = series[0].precision();
        if series.iter().any(|s| s.precision() != precision) {
            return Err(ModelError::MixedScale {
                numerator: series[0].query().clone(),
                denominator: series[1].query().clone(),
            });
        }

        let top = int(SCALE_MAX as i64);
        let all_zero = series.iter().all(|s| s.max_value().is_zero());
        if !all_zero && series.iter().all(|s| s.max_value() != &top) {
            return Err(ModelError::NotScaled);
        }

        let at_top: Vec<usize> = (0..series.len())
            .filter(|&i| series[i].max_value() == &top)
            .collect();
        for s in series.iter_mut() {
            s.response_id = response_id;
            s.peak = Peak::Below;
        }
        if at_top.len() == 1 {
            let s = &mut series[at_top[0]];
            let mut hits = s.points().iter().enumerate().filter(|(_, p)| p.value == top);
            let first = hits.next().map(|(i, _)| i);
            let point = if hits.next().is_none() { first } else { None };
            s.peak = Peak::Sole { point };
        } else {
            for &i in &at_top {
                series[i].peak = Peak::Shared;
            }
        }

        Ok(ProviderResponse {
            request,
            series,
            response_id,
        })
    }

    pub fn request(&self) -> &RequestSpec {
        &self.request
    }

    pub fn series(&self) -> &[InterestSeries] {
        &self.series
    }

    pub fn response_id(&self) -> ResponseId {
        self.response_id
    }

    pub fn series_for(&self, query: &QueryId) -> Option<&InterestSeries> {
        self.series.iter().find(|s| s.query() == query)
    }

    pub fn precision(&self) -> Precision {
        self.series[0].precision()
    }
}

/// Anything that answers requests with scaled series.
///
/// Implementations take `&self` and must tolerate concurrent callers.
pub trait Provider {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        (**self).fetch(request)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        (**self).fetch(request)
    }
}

impl<P: Provider + ?Sized> Provider for Arc<P> {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        (**self).fetch(request)
    }
}

/// 64-bit FNV-1a, used for stable response ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
