//! Constant-memory streaming inference: one prediction per incoming sample,
//! no history buffer. The filter bank carries everything the past
//! contributes, so the state size is fixed no matter how long the stream
//! runs.

use crate::artifact::{unpack_model, ModelDocument};
use crate::error::Result;
use crate::features::{derive_signals, EwStreamState, MeasuredSignals, Scaler, SpanSet};
use crate::model::TrainedModel;
use crate::scalar::Scalar;

pub struct StreamPredictor<F> {
    model: TrainedModel<F>,
    scaler: Scaler<F>,
    state: EwStreamState<F>,
    row_buf: Vec<F>,
    samples_seen: u64,
}

impl<F: Scalar> StreamPredictor<F> {
    pub fn new(model: TrainedModel<F>, scaler: Scaler<F>, spans: SpanSet) -> Self {
        let state = EwStreamState::new(spans);
        let row_buf = vec![F::zero(); state.feature_count()];
        StreamPredictor {
            model,
            scaler,
            state,
            row_buf,
            samples_seen: 0,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let model = unpack_model(doc.meta.model_type, &doc.params)?;
        let scaler = doc.meta.scaler.to_scaler();
        Ok(Self::new(model, scaler, doc.meta.spans))
    }

    /// Clears the filter state, e.g. at the start of a new session.
    pub fn reset(&mut self) {
        self.state.reset();
        self.samples_seen = 0;
    }

    /// Folds one sample in and returns ϑ̂_PM in °C.
    pub fn push(&mut self, signals: &MeasuredSignals<F>) -> Result<F> {
        let base = derive_signals(signals);
        self.state.update_into(&base, &mut self.row_buf);
        let scaled = self.scaler.transform_row(&self.row_buf);
        self.samples_seen += 1;
        self.model.predict_row(&scaled)
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Size of the mutable per-stream state; constant in stream length.
    pub fn state_bytes(&self) -> usize {
        self.state.state_bytes() + self.row_buf.capacity() * std::mem::size_of::<F>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::features::build_features;
    use crate::model::ModelSpec;

    #[test]
    fn stream_matches_batch_evaluation() {
        let config = SyntheticConfig::<f64> {
            duration_s: 400.0,
            n_profiles: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&config, 17).unwrap();
        let spans = SpanSet::new([4, 16, 64, 256]).unwrap();
        let features = build_features(&ds, spans).unwrap();
        let scaler = Scaler::fit(&features.x, &features.names).unwrap();
        let x = scaler.transform(&features.x);
        let model = ModelSpec::Ols.fit(&x, &features.y, &features.profiles, 0).unwrap();
        let batch = model.predict(&x).unwrap();

        let mut predictor = StreamPredictor::new(model, scaler, spans);
        let bytes_at_start = predictor.state_bytes();
        for span in ds.profiles() {
            predictor.reset();
            for r in span.start..span.end {
                let m = MeasuredSignals::from_sample(&ds.samples()[r]);
                let pred = predictor.push(&m).unwrap();
                assert!(
                    (pred - batch[r]).abs() <= 1e-6,
                    "row {r}: stream {pred} batch {}",
                    batch[r]
                );
            }
        }
        assert_eq!(predictor.state_bytes(), bytes_at_start);
    }
}
