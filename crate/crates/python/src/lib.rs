//! Python bindings: tokens, challenges, hashing, BCH, the commitment
//! protocol, distances and the randomness suite.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use specklepuf::metrics;
use specklepuf::protocol::{self, EnrollContext};
use specklepuf::rng::{self, TestParams};
use specklepuf::seed::derive_rng;
use specklepuf::{
    AuthOutcome, BitKey, BitStream, DecodeOutcome, Dims, Error, HashConfig, NoiseParams, PixelMask,
    SpeckleImage, SvdParams, TestId, TokenKind, TokenModel,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Format(_) | Error::DegenerateInput(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn noise(intensity: f64, phase: f64, delta_t: f64, seed: u64) -> NoiseParams {
    NoiseParams {
        intensity_sigma: intensity,
        phase_drift_sigma: phase,
        ..NoiseParams::none()
    }
    .with_delta_t(delta_t)
    .with_seed(seed)
}

fn key(bits: Vec<u8>) -> PyResult<BitKey> {
    BitKey::new(bits).map_err(py_err)
}

#[pyclass(
    name = "Challenge",
    module = "specklepuf_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyChallenge(specklepuf::Challenge);

#[pymethods]
impl PyChallenge {
    /// Random pixel pattern on a square grid.
    #[staticmethod]
    #[pyo3(signature = (seed=0, grid=16, density=0.5))]
    fn random(seed: u64, grid: usize, density: f64) -> PyResult<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(PyValueError::new_err("density must lie in [0, 1]"));
        }
        let dims = Dims::new(grid, grid).map_err(py_err)?;
        let mut rng = derive_rng("py-challenge", &[seed]);
        Ok(Self(specklepuf::Challenge::PixelPattern(
            PixelMask::random(dims, density, &mut rng),
        )))
    }

    #[staticmethod]
    fn full(grid: usize) -> PyResult<Self> {
        let dims = Dims::new(grid, grid).map_err(py_err)?;
        Ok(Self(specklepuf::Challenge::PixelPattern(PixelMask::full(
            dims,
        ))))
    }

    #[staticmethod]
    fn wavelength(nm: f64) -> PyResult<Self> {
        specklepuf::Challenge::wavelength(nm)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        specklepuf::Challenge::from_bytes(data)
            .map(Self)
            .map_err(|e| py_err(e.into()))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        match &self.0 {
            specklepuf::Challenge::PixelPattern(m) => {
                format!("Challenge(pattern {}, {} on)", m.dims(), m.count_on())
            }
            specklepuf::Challenge::Wavelength(nm) => format!("Challenge({nm} nm)"),
        }
    }
}

#[pyclass(name = "Image", module = "specklepuf_py", frozen)]
struct PyImage(SpeckleImage);

#[pymethods]
impl PyImage {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.dims().rows, self.0.dims().cols)
    }

    /// Row-major pixel values.
    fn pixels(&self) -> Vec<u16> {
        self.0.pixels().to_vec()
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_pgm())
    }

    #[staticmethod]
    fn from_pgm(data: &[u8]) -> PyResult<Self> {
        SpeckleImage::from_pgm(data).map(Self).map_err(py_err)
    }

    fn cross_correlation(&self, other: &PyImage) -> PyResult<f64> {
        metrics::cross_correlation(&self.0, &other.0).map_err(py_err)
    }

    fn euclidean(&self, other: &PyImage) -> PyResult<f64> {
        metrics::euclidean(&self.0, &other.0).map_err(py_err)
    }
}

#[pyclass(name = "Token", module = "specklepuf_py", frozen)]
struct PyToken(TokenModel);

#[pymethods]
impl PyToken {
    #[new]
    #[pyo3(signature = (seed, kind="diffuser", grid=16, size=128))]
    fn new(seed: u64, kind: &str, grid: usize, size: usize) -> PyResult<Self> {
        let kind = match kind {
            "diffuser" => TokenKind::Diffuser,
            "pof" => TokenKind::Pof,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown token kind {other:?}"
                )))
            }
        };
        let grid = Dims::new(grid, grid).map_err(py_err)?;
        let out = Dims::new(size, size).map_err(py_err)?;
        TokenModel::new(seed, kind, grid, out, kind.default_decorrelation_pm())
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        TokenModel::load(path).map(Self).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    #[getter]
    fn token_id(&self) -> String {
        hex::encode(self.0.token_id())
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    #[pyo3(signature = (challenge, noise=0.005, phase=0.05, delta_t=0.0, noise_seed=0))]
    fn respond(
        &self,
        py: Python<'_>,
        challenge: &PyChallenge,
        noise: f64,
        phase: f64,
        delta_t: f64,
        noise_seed: u64,
    ) -> PyResult<PyImage> {
        let params = self::noise(noise, phase, delta_t, noise_seed);
        py.detach(|| self.0.respond(&challenge.0, &params))
            .map(PyImage)
            .map_err(py_err)
    }
}

#[pyclass(name = "Bch", module = "specklepuf_py", frozen)]
struct PyBch(specklepuf::Bch);

#[pymethods]
impl PyBch {
    #[new]
    fn new(m: u32, t: usize) -> PyResult<Self> {
        specklepuf::Bch::new(m, t).map(Self).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn ell(&self) -> usize {
        self.0.ell()
    }

    #[getter]
    fn t(&self) -> usize {
        self.0.t()
    }

    fn encode(&self, message: Vec<u8>) -> PyResult<Vec<u8>> {
        self.0.encode(&message).map_err(py_err)
    }

    /// `(message, corrected)` or `None` when decoding fails.
    fn decode(&self, word: Vec<u8>) -> PyResult<Option<(Vec<u8>, usize)>> {
        Ok(match self.0.decode(&word).map_err(py_err)? {
            DecodeOutcome::Corrected { message, errors } => Some((message, errors)),
            DecodeOutcome::Failure => None,
        })
    }
}

#[pyclass(name = "Record", module = "specklepuf_py", frozen)]
struct PyRecord(protocol::EnrollmentRecord);

#[pymethods]
impl PyRecord {
    #[getter]
    fn record_id(&self) -> String {
        self.0.record_id_hex()
    }

    #[getter]
    fn token_id(&self) -> String {
        hex::encode(self.0.token_id)
    }

    #[getter]
    fn key_digest(&self) -> String {
        hex::encode(self.0.key_digest)
    }

    #[getter]
    fn challenge(&self) -> PyChallenge {
        PyChallenge(self.0.challenge.clone())
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        protocol::EnrollmentRecord::from_bytes(data)
            .map(Self)
            .map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        protocol::EnrollmentRecord::load(path)
            .map(Self)
            .map_err(py_err)
    }
}

fn hash_config(hash: &str, m: usize, seed: u64) -> PyResult<HashConfig> {
    match hash {
        "rbm" => Ok(HashConfig::rbm(m, seed)),
        "svd" => Ok(HashConfig::svd(
            SvdParams {
                m,
                ..SvdParams::default()
            },
            seed,
        )),
        other => Err(PyValueError::new_err(format!("unknown hash {other:?}"))),
    }
}

/// Hash of `image` with a fresh helper: `(key_bits, helper_bytes)`.
#[pyfunction]
#[pyo3(signature = (image, m=255, hash="rbm", seed=0))]
fn hash_image<'py>(
    py: Python<'py>,
    image: &PyImage,
    m: usize,
    hash: &str,
    seed: u64,
) -> PyResult<(Vec<u8>, Bound<'py, PyBytes>)> {
    let (key, helper) = hash_config(hash, m, seed)?
        .enroll(&image.0)
        .map_err(py_err)?;
    Ok((key.into_bits(), PyBytes::new(py, &helper.to_bytes())))
}

/// Hash of `image` under a stored helper.
#[pyfunction]
fn rehash(image: &PyImage, helper: &[u8]) -> PyResult<Vec<u8>> {
    let helper = specklepuf::HashHelper::from_bytes(helper).map_err(py_err)?;
    helper.hash(&image.0).map(BitKey::into_bits).map_err(py_err)
}

/// Captures a response and enrolls it. Returns `(key_bits, record)`.
#[pyfunction]
#[pyo3(signature = (token, challenge, m=8, t=31, hash="rbm", hash_seed=0, seed=0, noise=0.005, noise_seed=0))]
#[allow(clippy::too_many_arguments)]
fn enroll(
    py: Python<'_>,
    token: &PyToken,
    challenge: &PyChallenge,
    m: u32,
    t: usize,
    hash: &str,
    hash_seed: u64,
    seed: u64,
    noise: f64,
    noise_seed: u64,
) -> PyResult<(Vec<u8>, PyRecord)> {
    let code = specklepuf::Bch::new(m, t).map_err(py_err)?;
    let config = hash_config(hash, code.n(), hash_seed)?;
    let params = self::noise(noise, 0.05, 0.0, noise_seed);
    let (key, record) = py
        .detach(|| {
            let image = token.0.respond(&challenge.0, &params)?;
            let context = EnrollContext {
                token_id: token.0.token_id(),
                challenge: challenge.0.clone(),
            };
            protocol::enroll(&image, &config, &code, seed, context)
        })
        .map_err(py_err)?;
    Ok((key.into_bits(), PyRecord(record)))
}

/// Fresh capture checked against a record: `(accepted, corrected)`.
#[pyfunction]
#[pyo3(signature = (token, record, noise=0.005, noise_seed=1))]
fn authenticate(
    py: Python<'_>,
    token: &PyToken,
    record: &PyRecord,
    noise: f64,
    noise_seed: u64,
) -> PyResult<(bool, usize)> {
    let params = self::noise(noise, 0.05, 0.0, noise_seed);
    let outcome = py
        .detach(|| {
            let image = token.0.respond(&record.0.challenge, &params)?;
            protocol::authenticate(&image, &record.0)
        })
        .map_err(py_err)?;
    Ok(match outcome {
        AuthOutcome::Reproduced { key, corrected } => {
            (protocol::verify(&key, &record.0), corrected)
        }
        AuthOutcome::Rejected => (false, 0),
    })
}

#[pyfunction]
fn hamming(a: Vec<u8>, b: Vec<u8>) -> PyResult<usize> {
    key(a)?.hamming(&key(b)?).map_err(py_err)
}

/// Concatenated bits from each image.
#[pyfunction]
#[pyo3(signature = (images, bits_per_image, seed=0))]
fn extract_bits(
    images: Vec<PyRef<'_, PyImage>>,
    bits_per_image: usize,
    seed: u64,
) -> PyResult<Vec<u8>> {
    let images: Vec<SpeckleImage> = images.iter().map(|i| i.0.clone()).collect();
    rng::extract_bits(&images, seed, bits_per_image)
        .map(|s| s.bits().to_vec())
        .map_err(py_err)
}

type SuiteRow = (String, usize, usize, f64, bool);

/// Runs the statistical suite on consecutive `stream_len`-bit streams.
/// One `(test, passed, total, uniformity_p, ok)` tuple per test part.
#[pyfunction]
fn test_suite(py: Python<'_>, bits: Vec<u8>, stream_len: usize) -> PyResult<Vec<SuiteRow>> {
    let report = py
        .detach(|| {
            let streams = BitStream::new(bits)?.chunks(stream_len)?;
            rng::suite_report(&streams, &TestId::IMPLEMENTED, &TestParams::default())
        })
        .map_err(py_err)?;
    Ok(report
        .rows
        .iter()
        .map(|r| (r.name.clone(), r.passed, r.total, r.uniformity_p, r.ok()))
        .collect())
}

#[pymodule]
fn specklepuf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChallenge>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyToken>()?;
    m.add_class::<PyBch>()?;
    m.add_class::<PyRecord>()?;
    m.add_function(wrap_pyfunction!(hash_image, m)?)?;
    m.add_function(wrap_pyfunction!(rehash, m)?)?;
    m.add_function(wrap_pyfunction!(enroll, m)?)?;
    m.add_function(wrap_pyfunction!(authenticate, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(extract_bits, m)?)?;
    m.add_function(wrap_pyfunction!(test_suite, m)?)?;
    Ok(())
}
