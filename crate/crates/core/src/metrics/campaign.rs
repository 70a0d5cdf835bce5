use rand::seq::index;

use crate::bits::BitKey;
use crate::error::{invalid, Result};
use crate::hashing::HashConfig;
use crate::seed::{derive_rng, mix_seed};
use crate::token::{Challenge, Dims, NoiseParams, SpeckleImage, TokenKind, TokenModel};

use super::{euclidean_slice, pearson, Binning, DistanceReport};

/// Pairwise comparisons beyond this count are uniformly subsampled.
pub const MAX_PAIRS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    /// One token, one challenge, repeated noisy captures.
    Robustness,
    /// One token, many challenges.
    Unpredictability,
    /// Many tokens, one challenge.
    Unclonability,
}

impl CampaignKind {
    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::Robustness => "robustness",
            CampaignKind::Unpredictability => "unpredictability",
            CampaignKind::Unclonability => "unclonability",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub kind: CampaignKind,
    pub token_kind: TokenKind,
    pub grid: Dims,
    pub out: Dims,
    /// Decorrelation length in pm; `None` uses the kind default.
    pub decorrelation_pm: Option<f64>,
    pub token_seeds: Vec<u64>,
    pub challenges: Vec<Challenge>,
    pub noise: NoiseParams,
    /// Captures per (token, challenge). Robustness needs at least two.
    pub repeats: usize,
}

impl Campaign {
    /// A campaign on default-sized tokens.
    pub fn new(
        kind: CampaignKind,
        token_kind: TokenKind,
        token_seeds: Vec<u64>,
        challenges: Vec<Challenge>,
        noise: NoiseParams,
        repeats: usize,
    ) -> Self {
        let t = TokenModel::with_defaults(0, token_kind);
        Self {
            kind,
            token_kind,
            grid: t.grid_dims(),
            out: t.out_dims(),
            decorrelation_pm: None,
            token_seeds,
            challenges,
            noise,
            repeats,
        }
    }

    pub fn with_dims(mut self, grid: Dims, out: Dims) -> Self {
        self.grid = grid;
        self.out = out;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (tokens, challenges) = (self.token_seeds.len(), self.challenges.len());
        if self.repeats == 0 {
            return Err(invalid("repeat count must be positive"));
        }
        match self.kind {
            CampaignKind::Robustness if tokens != 1 || challenges != 1 || self.repeats < 2 => Err(
                invalid("robustness needs one token, one challenge and at least two repeats"),
            ),
            CampaignKind::Unpredictability if tokens != 1 || challenges < 2 => Err(invalid(
                "unpredictability needs one token and at least two challenges",
            )),
            CampaignKind::Unclonability if tokens < 2 || challenges != 1 => Err(invalid(
                "unclonability needs at least two tokens and one challenge",
            )),
            _ => self.noise.validate(),
        }
    }

    fn token(&self, seed: u64) -> Result<TokenModel> {
        TokenModel::new(
            seed,
            self.token_kind,
            self.grid,
            self.out,
            self.decorrelation_pm
                .unwrap_or(self.token_kind.default_decorrelation_pm()),
        )
    }

    /// All captures of the campaign; the first one is the reference.
    pub fn captures(&self) -> Result<Vec<SpeckleImage>> {
        self.validate()?;
        let mut images = Vec::new();
        let mut index = 0u64;
        let mut capture = |token: &TokenModel, c: &Challenge| -> Result<SpeckleImage> {
            let mut noise = self.noise;
            noise.noise_seed = mix_seed(self.noise.noise_seed, index);
            index += 1;
            token.respond(c, &noise)
        };
        for &seed in &self.token_seeds {
            let token = self.token(seed)?;
            for c in &self.challenges {
                for _ in 0..self.repeats {
                    images.push(capture(&token, c)?);
                }
            }
        }
        Ok(images)
    }

    /// Index pairs compared by this campaign, before subsampling.
    fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        match self.kind {
            CampaignKind::Robustness => {
                let total = n * (n - 1) / 2;
                if total <= MAX_PAIRS {
                    (0..n)
                        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                        .collect()
                } else {
                    let mut rng = derive_rng("campaign-pairs", &[self.noise.noise_seed, n as u64]);
                    let mut picked: Vec<usize> =
                        index::sample(&mut rng, total, MAX_PAIRS).into_vec();
                    picked.sort_unstable();
                    picked.into_iter().map(|k| unrank_pair(k, n)).collect()
                }
            }
            // Each other member against the reference, one per token or
            // challenge at the first repeat.
            _ => (1..n / self.repeats)
                .map(|g| (0, g * self.repeats))
                .collect(),
        }
    }
}

/// Maps `k` in `0..n(n-1)/2` to the `k`-th pair `(i, j)`, `i < j`, in
/// lexicographic order.
fn unrank_pair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

#[derive(Debug, Clone)]
pub struct CampaignReports {
    pub kind: CampaignKind,
    pub euclidean: DistanceReport,
    pub correlation: DistanceReport,
    /// Fractional Hamming distances of the hashes, when a hash was given.
    pub hamming: Option<DistanceReport>,
    pub pairs: usize,
}

/// Runs the campaign and compares its captures.
///
/// With a hash configuration the helper is enrolled once on the reference
/// capture and then held fixed for every member.
pub fn run_campaign(campaign: &Campaign, hash: Option<&HashConfig>) -> Result<CampaignReports> {
    let images = campaign.captures()?;
    let pairs = campaign.pairs(images.len());
    if pairs.is_empty() {
        return Err(invalid("campaign produced no pairs"));
    }
    let pixels: Vec<Vec<f64>> = images.iter().map(|im| im.to_f64()).collect();
    let keys: Option<Vec<BitKey>> = match hash {
        Some(cfg) => {
            let (_, helper) = cfg.enroll(&images[0])?;
            Some(
                images
                    .iter()
                    .map(|im| helper.hash(im))
                    .collect::<Result<_>>()?,
            )
        }
        None => None,
    };

    let mut ed = Vec::with_capacity(pairs.len());
    let mut cc = Vec::with_capacity(pairs.len());
    let mut hd = Vec::new();
    for &(i, j) in &pairs {
        ed.push(euclidean_slice(&pixels[i], &pixels[j]));
        // Identical constant captures (e.g. a dark challenge) correlate fully.
        cc.push(match pearson(&pixels[i], &pixels[j]) {
            Ok(v) => v,
            Err(_) if pixels[i] == pixels[j] => 1.0,
            Err(e) => return Err(e),
        });
        if let Some(k) = &keys {
            hd.push(k[i].hamming(&k[j])? as f64 / k[i].len() as f64);
        }
    }
    let binning = Binning::default();
    let hamming = match &keys {
        Some(k) => Some(DistanceReport::new(hd, &Binning::Hamming(k[0].len()))?),
        None => None,
    };
    Ok(CampaignReports {
        kind: campaign.kind,
        euclidean: DistanceReport::new(ed, &binning)?,
        correlation: DistanceReport::new(cc, &binning)?,
        hamming,
        pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::PixelMask;

    fn small(
        kind: CampaignKind,
        seeds: Vec<u64>,
        challenges: Vec<Challenge>,
        repeats: usize,
    ) -> Campaign {
        Campaign::new(
            kind,
            TokenKind::Diffuser,
            seeds,
            challenges,
            NoiseParams::typical(),
            repeats,
        )
        .with_dims(Dims::new(4, 4).unwrap(), Dims::new(16, 16).unwrap())
    }

    fn mask(seed: u64) -> Challenge {
        Challenge::PixelPattern(PixelMask::random(
            Dims::new(4, 4).unwrap(),
            0.5,
            &mut derive_rng("m", &[seed]),
        ))
    }

    #[test]
    fn unrank_covers_all_pairs_in_order() {
        let n = 6;
        let all: Vec<_> = (0..15).map(|k| unrank_pair(k, n)).collect();
        let want: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        assert_eq!(all, want);
    }

    #[test]
    fn shape_validation() {
        assert!(
            small(CampaignKind::Robustness, vec![1, 2], vec![mask(1)], 3)
                .validate()
                .is_err()
        );
        assert!(small(CampaignKind::Robustness, vec![1], vec![mask(1)], 1)
            .validate()
            .is_err());
        assert!(
            small(CampaignKind::Unpredictability, vec![1], vec![mask(1)], 1)
                .validate()
                .is_err()
        );
        assert!(
            small(CampaignKind::Unclonability, vec![1], vec![mask(1)], 1)
                .validate()
                .is_err()
        );
    }

    #[test]
    fn zero_noise_robustness_has_zero_distance() {
        let mut c = small(CampaignKind::Robustness, vec![5], vec![mask(2)], 4);
        c.noise = NoiseParams::none();
        let r = run_campaign(&c, Some(&HashConfig::rbm(31, 1))).unwrap();
        assert_eq!(r.pairs, 6);
        assert!(r.euclidean.values.iter().all(|&v| v == 0.0));
        assert!(r.hamming.unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reference_pairs_for_other_kinds() {
        let c = small(
            CampaignKind::Unclonability,
            vec![1, 2, 3, 4],
            vec![mask(3)],
            1,
        );
        let r = run_campaign(&c, None).unwrap();
        assert_eq!(r.pairs, 3);
        let c = small(
            CampaignKind::Unpredictability,
            vec![1],
            (0..5).map(mask).collect(),
            2,
        );
        assert_eq!(c.pairs(10), vec![(0, 2), (0, 4), (0, 6), (0, 8)]);
    }
}
