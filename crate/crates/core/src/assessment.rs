//! Classroom evaluation arithmetic: normalized learning gain between two
//! tests and Welch's two-sample t-test.

use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessmentError {
    #[error("score {value} outside [0, 100] for {field}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("test2 = 100 leaves no room for gain")]
    DenominatorZero,
    #[error("group {group} needs at least two scores, got {count}")]
    InsufficientData { group: String, count: usize },
    #[error("both groups have zero variance")]
    ZeroVariance,
    #[error("malformed score file: {0}")]
    Malformed(String),
}

/// Scores of one student on the test before and after an activity, in
/// percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair<T> {
    test2: T,
    test3: T,
}

impl<T: Scalar> ScorePair<T> {
    pub fn new(test2: T, test3: T) -> Result<Self, AssessmentError> {
        let hundred = T::lit(100.0);
        let in_range = |x: T| x >= T::zero() && x <= hundred;
        if !in_range(test2) {
            return Err(AssessmentError::OutOfRange {
                field: "test2",
                value: test2.to_f64_lossy(),
            });
        }
        if !in_range(test3) {
            return Err(AssessmentError::OutOfRange {
                field: "test3",
                value: test3.to_f64_lossy(),
            });
        }
        if test2 == hundred {
            return Err(AssessmentError::DenominatorZero);
        }
        Ok(ScorePair { test2, test3 })
    }

    pub fn test2(&self) -> T {
        self.test2
    }

    pub fn test3(&self) -> T {
        self.test3
    }
}

/// `(test3 − test2) / (100 − test2)`: the realized fraction of the gain that
/// was still available after test 2. Negative when the score dropped.
pub fn normalized_gain<T: Scalar>(pair: &ScorePair<T>) -> T {
    (pair.test3 - pair.test2) / (T::lit(100.0) - pair.test2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult<T> {
    pub t: T,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: T,
    pub p_two_tailed: T,
}

fn mean_and_variance<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_usize(xs.len()).expect("length fits scalar");
    let mean = xs.iter().fold(T::zero(), |acc, &x| acc + x) / n;
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean));
    (mean, ss / (n - T::one()))
}

/// Welch's unequal-variance t-test of `a` against `b`.
///
/// One group may have zero variance; both together leave the statistic
/// undefined.
pub fn welch_t<T: Scalar>(a: &[T], b: &[T]) -> Result<TTestResult<T>, AssessmentError> {
    for (group, xs) in [("A", a), ("B", b)] {
        if xs.len() < 2 {
            return Err(AssessmentError::InsufficientData {
                group: group.to_string(),
                count: xs.len(),
            });
        }
    }
    let (mean_a, var_a) = mean_and_variance(a);
    let (mean_b, var_b) = mean_and_variance(b);
    let na = T::from_usize(a.len()).expect("length fits scalar");
    let nb = T::from_usize(b.len()).expect("length fits scalar");
    let (qa, qb) = (var_a / na, var_b / nb);
    let se2 = qa + qb;
    if !(se2 > T::zero()) {
        return Err(AssessmentError::ZeroVariance);
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - T::one()) + qb * qb / (nb - T::one()));
    Ok(TTestResult {
        t,
        df,
        p_two_tailed: student_t_two_tailed(t, df),
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed<T: Scalar>(t: T, df: T) -> T {
    if t.is_infinite() {
        return T::zero();
    }
    let x = df / (df + t * t);
    let half = T::lit(0.5);
    regularized_incomplete_beta(x, df * half, half)
        .max(T::zero())
        .min(T::one())
}

/// Lanczos approximation (g = 7, 9 terms) of ln Γ(x) for x > 0.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::lit(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (T::PI() / (T::PI() * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut sum = T::lit(COEFFS[0]);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        sum += T::lit(c) / (x + T::from_usize(i).expect("small index"));
    }
    let g = T::lit(7.0);
    let tail = x + g + half;
    half * (T::TAU()).ln() + (x + half) * tail.ln() - tail + sum.ln()
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta<T: Scalar>(x: T, a: T, b: T) -> T {
    let (zero, one) = (T::zero(), T::one());
    if x <= zero {
        return zero;
    }
    if x >= one {
        return one;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (one - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fast for x below (a+1)/(a+b+2)
    if x < (a + one) / (a + b + T::lit(2.0)) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        one - front * beta_continued_fraction(one - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction<T: Scalar>(x: T, a: T, b: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let tiny = T::min_positive_value() / T::epsilon();
    let tolerance = T::epsilon();
    let guard = |v: T| if v.abs() < tiny { tiny } else { v };

    let mut c = one;
    let mut d = one / guard(one - (a + b) * x / (a + one));
    let mut h = d;
    for m in 1..=300u32 {
        let m = T::from_u32(m).expect("small index");
        let m2 = two * m;
        let even = m * (b - m) * x / ((a + m2 - one) * (a + m2));
        d = one / guard(one + even * d);
        c = guard(one + even / c);
        h *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + one));
        d = one / guard(one + odd * d);
        c = guard(one + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - one).abs() <= tolerance {
            break;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Score files

#[derive(Debug, Deserialize)]
struct GainRow {
    student_id: String,
    test2: f64,
    test3: f64,
    #[serde(default)]
    group: Option<String>,
}

#[derive(Debug, Deserialize)]
struct GroupRow {
    group: String,
    score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentGain {
    pub student_id: String,
    pub group: Option<String>,
    pub pair: ScorePair<f64>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub students: Vec<StudentGain>,
    pub mean_gain: f64,
    /// Mean gain per group, in order of first appearance.
    pub group_means: Vec<(String, f64)>,
}

/// Reads a `student_id,test2,test3[,group]` file and computes every gain.
pub fn gain_report<R: Read>(input: R) -> Result<GainReport, AssessmentError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut students = Vec::new();
    for row in reader.deserialize::<GainRow>() {
        let row = row.map_err(|e| AssessmentError::Malformed(e.to_string()))?;
        let pair = ScorePair::new(row.test2, row.test3)?;
        students.push(StudentGain {
            gain: normalized_gain(&pair),
            student_id: row.student_id,
            group: row.group.filter(|g| !g.is_empty()),
            pair,
        });
    }
    if students.is_empty() {
        return Err(AssessmentError::InsufficientData {
            group: "all".to_string(),
            count: 0,
        });
    }
    let mean = |gains: &[f64]| gains.iter().sum::<f64>() / gains.len() as f64;
    let all: Vec<f64> = students.iter().map(|s| s.gain).collect();
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for student in &students {
        if let Some(g) = &student.group {
            match groups.iter_mut().find(|(name, _)| name == g) {
                Some((_, gains)) => gains.push(student.gain),
                None => groups.push((g.clone(), vec![student.gain])),
            }
        }
    }
    Ok(GainReport {
        mean_gain: mean(&all),
        group_means: groups.into_iter().map(|(g, gains)| (g, mean(&gains))).collect(),
        students,
    })
}

/// Reads a `group,score` file with groups `A` and `B`.
pub fn read_group_scores<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>), AssessmentError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<GroupRow>() {
        let row = row.map_err(|e| AssessmentError::Malformed(e.to_string()))?;
        if !row.score.is_finite() {
            return Err(AssessmentError::Malformed(format!("non-finite score {}", row.score)));
        }
        match row.group.as_str() {
            "A" | "a" => a.push(row.score),
            "B" | "b" => b.push(row.score),
            other => return Err(AssessmentError::Malformed(format!("unknown group `{other}`"))),
        }
    }
    Ok((a, b))
}
