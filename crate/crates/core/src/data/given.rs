use super::Dataset;
use crate::approximators::{fit_cross_entropy, FitOptions};
use crate::error::Result;
use crate::model::{BlackBoxModel, MlpModel};
use crate::rng::{stream, Stream};
use crate::types::argmax;

/// Architecture and training budget of the model to be explained.
#[derive(Debug, Clone, PartialEq)]
pub struct GivenModelSpec {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GivenModelSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Fraction of samples whose predicted class equals the true label.
pub fn accuracy(model: &dyn BlackBoxModel, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let out = model.evaluate_batch(ds.x.view())?;
    let hits = out
        .rows()
        .into_iter()
        .zip(&ds.labels)
        .filter(|(row, &l)| argmax(row.view()) == l)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Trains an MLP on true labels. This is the only place labels are used for
/// fitting. Returns the frozen model and its accuracy on `test`.
pub fn train_given_model(train: &Dataset, test: &Dataset, spec: &GivenModelSpec) -> Result<(MlpModel, f64)> {
    let mut model = MlpModel::new(
        train.n_features(),
        &spec.hidden,
        train.n_classes,
        &mut stream(spec.seed, Stream::Model),
    )?;
    let opts = FitOptions {
        epochs: spec.epochs,
        batch_size: spec.batch_size,
        learning_rate: spec.learning_rate,
    };
    let mut rng = crate::rng::substream(spec.seed, Stream::Model, 1);
    fit_cross_entropy(&mut model.net, train.x.view(), train.one_hot().view(), opts, &mut rng)?;
    let acc = accuracy(&model, test)?;
    log::info!("given model test accuracy {acc:.4}");
    Ok((model, acc))
}
