//! Alternating generator/discriminator optimization of the two-GAN translator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::translation::config::TranslationConfig;
use crate::translation::loss::{l1, l1_with_grad, lsgan, lsgan_with_grad};
use crate::translation::network::{patch_discriminator, resnet_generator, Grads, Network};
use crate::translation::optim::Adam;
use crate::translation::tensor::{Scalar, Tensor};

/// Per-batch loss breakdown. Cycle and identity terms are L1 distances on the
/// engine's `[-1, 1]` value scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub adversarial_ab: f64,
    pub adversarial_ba: f64,
    pub cycle_a: f64,
    pub cycle_b: f64,
    pub identity: f64,
    pub generator_total: f64,
    pub discriminator_total: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "epoch,adversarial_ab,adversarial_ba,cycle_a,cycle_b,identity,generator_total,discriminator_total";

    fn fields(&self) -> [f64; 7] {
        [
            self.adversarial_ab,
            self.adversarial_ba,
            self.cycle_a,
            self.cycle_b,
            self.identity,
            self.generator_total,
            self.discriminator_total,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite())
    }

    pub fn csv_row(&self, epoch: usize) -> String {
        let mut row = epoch.to_string();
        for v in self.fields() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }

    /// Field-wise mean.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        if reports.is_empty() {
            return LossReport::default();
        }
        let n = reports.len() as f64;
        let mut acc = [0.0; 7];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.fields()) {
                *a += v;
            }
        }
        LossReport {
            adversarial_ab: acc[0] / n,
            adversarial_ba: acc[1] / n,
            cycle_a: acc[2] / n,
            cycle_b: acc[3] / n,
            identity: acc[4] / n,
            generator_total: acc[5] / n,
            discriminator_total: acc[6] / n,
        }
    }
}

/// Mean losses of one completed epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub losses: LossReport,
}

/// Both generators and both discriminators. `disc_a` judges domain A (IHC),
/// `disc_b` judges domain B (H&E).
#[derive(Debug, Clone)]
pub struct Models<T> {
    pub gen_ab: Network<T>,
    pub gen_ba: Network<T>,
    pub disc_a: Network<T>,
    pub disc_b: Network<T>,
}

impl<T: Scalar> Models<T> {
    /// Architecture described by `config`, weights drawn from `N(0, init_std)`.
    pub fn initialize(config: &TranslationConfig, rng: &mut impl Rng) -> Self {
        let mut models = Self::architecture(config);
        for net in models.networks_mut() {
            net.init_normal(config.init_std, rng);
        }
        models
    }

    /// Zero-initialized networks with the configured shapes.
    pub fn architecture(config: &TranslationConfig) -> Self {
        let g = |name| resnet_generator(name, config.generator_filters, config.generator_blocks);
        let d = |name| {
            patch_discriminator(
                name,
                config.discriminator_filters,
                config.discriminator_layers,
            )
        };
        Self {
            gen_ab: g("gen_ab"),
            gen_ba: g("gen_ba"),
            disc_a: d("disc_a"),
            disc_b: d("disc_b"),
        }
    }

    pub fn networks(&self) -> [&Network<T>; 4] {
        [&self.gen_ab, &self.gen_ba, &self.disc_a, &self.disc_b]
    }

    pub fn networks_mut(&mut self) -> [&mut Network<T>; 4] {
        [
            &mut self.gen_ab,
            &mut self.gen_ba,
            &mut self.disc_a,
            &mut self.disc_b,
        ]
    }
}

/// Weights of the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cycle: f64,
    pub identity: f64,
}

impl From<&TranslationConfig> for LossWeights {
    fn from(c: &TranslationConfig) -> Self {
        Self {
            cycle: c.cycle_weight,
            identity: c.identity_weight,
        }
    }
}

/// Generator objective of one sample pair, optionally with gradients.
pub struct GeneratorPass<T> {
    pub report: LossReport,
    pub grads_ab: Grads<T>,
    pub grads_ba: Grads<T>,
    pub fake_a: Tensor<T>,
    pub fake_b: Tensor<T>,
}

fn as_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Total generator loss
/// `adv(A->B) + adv(B->A) + w_cyc (cyc_A + cyc_B) + w_id (id_A + id_B)`
/// for one `(a, b)` pair, with gradients for both generators.
pub fn generator_pass<T: Scalar>(
    models: &Models<T>,
    real_a: &Tensor<T>,
    real_b: &Tensor<T>,
    weights: LossWeights,
) -> GeneratorPass<T> {
    let (g_ab, g_ba) = (&models.gen_ab, &models.gen_ba);
    let w_cyc = T::lit(weights.cycle);
    let w_id = T::lit(weights.identity);

    let (fake_b, tape_fake_b) = g_ab.forward(real_a);
    let (rec_a, tape_rec_a) = g_ba.forward(&fake_b);
    let (fake_a, tape_fake_a) = g_ba.forward(real_b);
    let (rec_b, tape_rec_b) = g_ab.forward(&fake_a);

    let (scores_b, tape_db) = models.disc_b.forward(&fake_b);
    let (adv_ab, g_scores_b) = lsgan_with_grad(&scores_b, true);
    let (scores_a, tape_da) = models.disc_a.forward(&fake_a);
    let (adv_ba, g_scores_a) = lsgan_with_grad(&scores_a, true);

    let (cyc_a, mut g_rec_a) = l1_with_grad(&rec_a, real_a);
    let (cyc_b, mut g_rec_b) = l1_with_grad(&rec_b, real_b);
    g_rec_a.scale(w_cyc);
    g_rec_b.scale(w_cyc);

    let mut grads_ab = g_ab.zero_grads();
    let mut grads_ba = g_ba.zero_grads();

    let mut g_fake_b = models.disc_b.backward(&tape_db, g_scores_b, None);
    g_fake_b.add_assign(&g_ba.backward(&tape_rec_a, g_rec_a, Some(&mut grads_ba)));
    let mut g_fake_a = models.disc_a.backward(&tape_da, g_scores_a, None);
    g_fake_a.add_assign(&g_ab.backward(&tape_rec_b, g_rec_b, Some(&mut grads_ab)));
    g_ab.backward(&tape_fake_b, g_fake_b, Some(&mut grads_ab));
    g_ba.backward(&tape_fake_a, g_fake_a, Some(&mut grads_ba));

    let mut identity = T::zero();
    if weights.identity > 0.0 {
        let (idt_b, tape_idt_b) = g_ab.forward(real_b);
        let (idt_a, tape_idt_a) = g_ba.forward(real_a);
        let (l_b, mut g_b) = l1_with_grad(&idt_b, real_b);
        let (l_a, mut g_a) = l1_with_grad(&idt_a, real_a);
        g_b.scale(w_id);
        g_a.scale(w_id);
        g_ab.backward(&tape_idt_b, g_b, Some(&mut grads_ab));
        g_ba.backward(&tape_idt_a, g_a, Some(&mut grads_ba));
        identity = l_a + l_b;
    }

    let total = adv_ab + adv_ba + w_cyc * (cyc_a + cyc_b) + w_id * identity;
    GeneratorPass {
        report: LossReport {
            adversarial_ab: as_f64(adv_ab),
            adversarial_ba: as_f64(adv_ba),
            cycle_a: as_f64(cyc_a),
            cycle_b: as_f64(cyc_b),
            identity: as_f64(identity),
            generator_total: as_f64(total),
            discriminator_total: 0.0,
        },
        grads_ab,
        grads_ba,
        fake_a,
        fake_b,
    }
}

/// Forward-only value of the generator objective (same terms as
/// [`generator_pass`]).
pub fn generator_loss<T: Scalar>(
    models: &Models<T>,
    real_a: &Tensor<T>,
    real_b: &Tensor<T>,
    weights: LossWeights,
) -> f64 {
    let (g_ab, g_ba) = (&models.gen_ab, &models.gen_ba);
    let fake_b = g_ab.predict(real_a);
    let fake_a = g_ba.predict(real_b);
    let rec_a = g_ba.predict(&fake_b);
    let rec_b = g_ab.predict(&fake_a);
    let adv = lsgan(&models.disc_b.predict(&fake_b), true) + lsgan(&models.disc_a.predict(&fake_a), true);
    let cyc = l1(&rec_a, real_a) + l1(&rec_b, real_b);
    let mut total = as_f64(adv) + weights.cycle * as_f64(cyc);
    if weights.identity > 0.0 {
        let idt = l1(&g_ab.predict(real_b), real_b) + l1(&g_ba.predict(real_a), real_a);
        total += weights.identity * as_f64(idt);
    }
    total
}

/// Least-squares discriminator loss `0.5 (D(real) - 1)^2 + 0.5 D(fake)^2`,
/// accumulating parameter gradients.
fn discriminator_pass<T: Scalar>(
    disc: &Network<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    grads: &mut Grads<T>,
) -> f64 {
    let half = T::lit(0.5);
    let (s_real, tape_real) = disc.forward(real);
    let (l_real, mut g_real) = lsgan_with_grad(&s_real, true);
    g_real.scale(half);
    disc.backward(&tape_real, g_real, Some(grads));
    let (s_fake, tape_fake) = disc.forward(fake);
    let (l_fake, mut g_fake) = lsgan_with_grad(&s_fake, false);
    g_fake.scale(half);
    disc.backward(&tape_fake, g_fake, Some(grads));
    as_f64(half * (l_real + l_fake))
}

/// History of generated images shown to the discriminators.
#[derive(Debug, Clone)]
struct ReplayPool<T> {
    capacity: usize,
    images: Vec<Tensor<T>>,
}

impl<T: Scalar> ReplayPool<T> {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            images: Vec::new(),
        }
    }

    fn query(&mut self, image: Tensor<T>, rng: &mut impl Rng) -> Tensor<T> {
        if self.capacity == 0 {
            return image;
        }
        if self.images.len() < self.capacity {
            self.images.push(image.clone());
            return image;
        }
        if rng.gen::<f64>() > 0.5 {
            let idx = rng.gen_range(0..self.images.len());
            std::mem::replace(&mut self.images[idx], image)
        } else {
            image
        }
    }
}

fn add_grads<T: Scalar>(acc: &mut Grads<T>, other: &Grads<T>) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = *x + y;
        }
    }
}

fn scale_grads<T: Scalar>(grads: &mut Grads<T>, k: T) {
    grads.iter_mut().flatten().for_each(|v| *v = *v * k);
}

/// Training state: networks, optimizers, replay pools and the RNG stream.
pub struct Trainer {
    pub config: TranslationConfig,
    pub models: Models<f32>,
    opt_gen_ab: Adam<f32>,
    opt_gen_ba: Adam<f32>,
    opt_disc_a: Adam<f32>,
    opt_disc_b: Adam<f32>,
    pool_a: ReplayPool<f32>,
    pool_b: ReplayPool<f32>,
    rng: ChaCha8Rng,
    /// Number of completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochLoss>,
    batch_index: usize,
}

/// Result of [`Trainer::train_epoch`].
#[derive(Debug, Clone)]
pub struct EpochSummary {
    pub mean: LossReport,
    pub steps: Vec<LossReport>,
}

impl Trainer {
    pub fn new(config: TranslationConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let models = Models::initialize(&config, &mut rng);
        Ok(Self::from_parts(config, models, rng))
    }

    fn from_parts(config: TranslationConfig, models: Models<f32>, rng: ChaCha8Rng) -> Self {
        let adam = |net: &Network<f32>| Adam::new(net, config.learning_rate, config.beta1, config.beta2);
        let pool = if config.replay_buffer { config.pool_size } else { 0 };
        Self {
            opt_gen_ab: adam(&models.gen_ab),
            opt_gen_ba: adam(&models.gen_ba),
            opt_disc_a: adam(&models.disc_a),
            opt_disc_b: adam(&models.disc_b),
            pool_a: ReplayPool::new(pool),
            pool_b: ReplayPool::new(pool),
            rng,
            epoch: 0,
            history: Vec::new(),
            batch_index: 0,
            config,
            models,
        }
    }

    fn set_learning_rate(&mut self, lr: f64) {
        for opt in [
            &mut self.opt_gen_ab,
            &mut self.opt_gen_ba,
            &mut self.opt_disc_a,
            &mut self.opt_disc_b,
        ] {
            opt.lr = lr;
        }
    }

    fn diverged(&self, detail: impl Into<String>) -> Error {
        Error::TrainingDiverged {
            epoch: self.epoch,
            batch: self.batch_index,
            detail: detail.into(),
        }
    }

    /// One generator update followed by one discriminator update on a batch
    /// of unpaired samples (`batch_a[i]` and `batch_b[i]` are unrelated).
    pub fn train_step(&mut self, batch_a: &[Tensor<f32>], batch_b: &[Tensor<f32>]) -> Result<LossReport> {
        if batch_a.is_empty() || batch_a.len() != batch_b.len() {
            return Err(Error::invalid(format!(
                "batch sizes must match and be non-empty, got {} and {}",
                batch_a.len(),
                batch_b.len()
            )));
        }
        let n = batch_a.len();
        let inv_n = 1.0 / n as f32;
        let weights = LossWeights::from(&self.config);

        let models = &self.models;
        let passes: Vec<GeneratorPass<f32>> = if self.config.deterministic {
            batch_a
                .iter()
                .zip(batch_b)
                .map(|(a, b)| generator_pass(models, a, b, weights))
                .collect()
        } else {
            batch_a
                .par_iter()
                .zip(batch_b.par_iter())
                .map(|(a, b)| generator_pass(models, a, b, weights))
                .collect()
        };

        let mut grads_ab = self.models.gen_ab.zero_grads();
        let mut grads_ba = self.models.gen_ba.zero_grads();
        let mut reports = Vec::with_capacity(n);
        let mut fakes = Vec::with_capacity(n);
        for pass in passes {
            add_grads(&mut grads_ab, &pass.grads_ab);
            add_grads(&mut grads_ba, &pass.grads_ba);
            reports.push(pass.report);
            fakes.push((pass.fake_a, pass.fake_b));
        }
        let mut report = LossReport::mean(&reports);
        if !report.is_finite() {
            return Err(self.diverged(format!("non-finite generator loss {report:?}")));
        }
        scale_grads(&mut grads_ab, inv_n);
        scale_grads(&mut grads_ba, inv_n);
        self.opt_gen_ab.step(&mut self.models.gen_ab, &grads_ab);
        self.opt_gen_ba.step(&mut self.models.gen_ba, &grads_ba);

        let mut pooled = Vec::with_capacity(n);
        for (fake_a, fake_b) in fakes {
            let pa = self.pool_a.query(fake_a, &mut self.rng);
            let pb = self.pool_b.query(fake_b, &mut self.rng);
            pooled.push((pa, pb));
        }
        let mut grads_da = self.models.disc_a.zero_grads();
        let mut grads_db = self.models.disc_b.zero_grads();
        let mut d_loss = 0.0;
        for ((a, b), (fake_a, fake_b)) in batch_a.iter().zip(batch_b).zip(&pooled) {
            d_loss += discriminator_pass(&self.models.disc_a, a, fake_a, &mut grads_da);
            d_loss += discriminator_pass(&self.models.disc_b, b, fake_b, &mut grads_db);
        }
        report.discriminator_total = d_loss / n as f64;
        if !report.discriminator_total.is_finite() {
            return Err(self.diverged("non-finite discriminator loss"));
        }
        scale_grads(&mut grads_da, inv_n);
        scale_grads(&mut grads_db, inv_n);
        self.opt_disc_a.step(&mut self.models.disc_a, &grads_da);
        self.opt_disc_b.step(&mut self.models.disc_b, &grads_db);
        self.batch_index += 1;
        Ok(report)
    }

    /// One pass over the data. The epoch visits every domain-A sample once in
    /// shuffled order (cycling when domain B is larger) and pairs each with a
    /// randomly drawn domain-B sample.
    pub fn train_epoch(&mut self, data_a: &[Tensor<f32>], data_b: &[Tensor<f32>]) -> Result<EpochSummary> {
        if data_a.is_empty() || data_b.is_empty() {
            return Err(Error::invalid(format!(
                "both domains need samples, got {} and {}",
                data_a.len(),
                data_b.len()
            )));
        }
        let size = self.config.patch_size;
        if let Some(bad) = data_a
            .iter()
            .chain(data_b)
            .find(|t| t.height != size || t.width != size || t.channels != 3)
        {
            return Err(Error::invalid(format!(
                "training sample is {}x{}x{}, expected 3x{size}x{size}",
                bad.channels, bad.height, bad.width
            )));
        }
        let lr = self.config.learning_rate * self.config.lr_factor(self.epoch);
        self.set_learning_rate(lr);
        self.batch_index = 0;

        let len = data_a.len().max(data_b.len());
        let mut order: Vec<usize> = (0..len).map(|i| i % data_a.len()).collect();
        order.shuffle(&mut self.rng);
        let mut steps = Vec::new();
        for chunk in order.chunks(self.config.batch_size) {
            let batch_a: Vec<Tensor<f32>> = chunk.iter().map(|&i| data_a[i].clone()).collect();
            let batch_b: Vec<Tensor<f32>> = chunk
                .iter()
                .map(|_| data_b[self.rng.gen_range(0..data_b.len())].clone())
                .collect();
            steps.push(self.train_step(&batch_a, &batch_b)?);
        }
        let mean = LossReport::mean(&steps);
        self.history.push(EpochLoss {
            epoch: self.epoch,
            losses: mean,
        });
        self.epoch += 1;
        Ok(EpochSummary { mean, steps })
    }
}


/// Runs `config.epochs` epochs from a fresh initialization. `on_checkpoint`
/// receives an intermediate checkpoint every `config.checkpoint_every` epochs.
pub fn train(
    config: TranslationConfig,
    data_a: &[Tensor<f32>],
    data_b: &[Tensor<f32>],
    mut on_checkpoint: impl FnMut(&crate::translation::TranslationCheckpoint) -> Result<()>,
) -> Result<crate::translation::TranslationCheckpoint> {
    use crate::translation::TranslationCheckpoint;

    let mut trainer = Trainer::new(config)?;
    if trainer.config.epochs > 0 && (data_a.is_empty() || data_b.is_empty()) {
        return Err(Error::invalid("both domains need at least one training patch"));
    }
    while trainer.epoch < trainer.config.epochs {
        trainer.train_epoch(data_a, data_b)?;
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.epoch % every == 0 && trainer.epoch < trainer.config.epochs {
            on_checkpoint(&TranslationCheckpoint::from_trainer(&trainer))?;
        }
    }
    Ok(TranslationCheckpoint::from_trainer(&trainer))
}
