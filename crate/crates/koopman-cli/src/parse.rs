//! Line-oriented grammar for dynamical-system definition files.
//!
//! A definition is a sequence of `key = value` directives; `#` starts a
//! comment and blank lines are skipped. The smallest useful file declares
//! a dimension and one polynomial component per coordinate:
//!
//! ```text
//! dim = 2
//! f1 = -x2
//! f2 = x1 - x2 + x1^2*x2
//! ```
//!
//! Component expressions are built from `+ - * ^`, parentheses, decimal
//! or `p/q` rational literals, and the variables `x1..xN`. Exponents must
//! be nonnegative integer literals, and `/` only joins two integer
//! literals into an exact rational coefficient.
//!
//! Planar systems given in polar form declare `coords = polar` and then
//! the radial and angular speeds instead of `f1`/`f2`:
//!
//! ```text
//! dim = 2
//! coords = polar
//! fr = r*(1 - r^2)*(2 + cos(6*theta) - cos(10*theta))
//! ftheta = 1
//! ```
//!
//! Polar expressions use `r`, `cos(n*theta)`, and `sin(n*theta)` in place
//! of the cartesian variables.
//!
//! Remaining directives configure the analysis and are all optional;
//! command-line flags override them. `box = lo1 hi1 lo2 hi2 …` sets the
//! region of interest, `method = taylor|bernstein` picks the fixed-point
//! solver, and `order`, `degree`, `nbar`, `stride`, `field_degree`,
//! `delta`, `e_r_norm`, `p`, `resolution`, `samples`, `horizon`, and
//! `guess` set the matching numeric parameters.
//!
//! All parse failures report the 1-based line and column of the offending
//! token.

use koopman::poly::MonomialPoly;
use koopman::system::{BoxMap, DynamicalSystem, TrigRadial};
use koopman::{Error, Result};
use num_complex::Complex64;

/// Fixed-point solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Graded Taylor expansion about the fixed point.
    Taylor,
    /// Global Bernstein least squares on the region box.
    Bernstein,
}

impl Method {
    /// Stable lowercase name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Method::Taylor => "taylor",
            Method::Bernstein => "bernstein",
        }
    }
}

/// Vector field as written in the file: cartesian polynomial components
/// or a polar radial/angular speed pair.
#[derive(Clone, Debug)]
pub enum Coords {
    /// `f1..fN` polynomial right-hand sides.
    Cartesian(Vec<MonomialPoly>),
    /// `fr` and `ftheta` trigonometric-radial speeds (planar only).
    Polar {
        f_r: TrigRadial,
        f_theta: TrigRadial,
    },
}

/// Optional analysis parameters from the file; `None` means the directive
/// was absent and a flag or default applies.
#[derive(Clone, Debug, Default)]
pub struct AnalysisParams {
    pub method: Option<Method>,
    pub order: Option<u32>,
    pub degree: Option<usize>,
    pub n_bar: Option<usize>,
    pub stride: Option<usize>,
    pub field_degree: Option<usize>,
    pub delta: Option<f64>,
    pub e_r_norm: Option<f64>,
    pub p: Option<u32>,
    pub resolution: Option<usize>,
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
    pub guess: Option<Vec<f64>>,
}

/// A fully parsed definition file.
#[derive(Clone, Debug)]
pub struct SystemDefinition {
    /// Declared state dimension.
    pub dim: usize,
    /// The vector field.
    pub coords: Coords,
    /// Region of interest from the `box` directive.
    pub region: Option<BoxMap>,
    /// Analysis parameters from the file.
    pub analysis: AnalysisParams,
    /// The original text, verbatim (embedded in reports so they stay
    /// self-contained).
    pub source: String,
}

impl SystemDefinition {
    /// Build the dynamical system the file describes.
    pub fn system(&self) -> Result<DynamicalSystem> {
        match &self.coords {
            Coords::Cartesian(components) => DynamicalSystem::polynomial(components.clone()),
            Coords::Polar { f_r, f_theta } => DynamicalSystem::polar(f_r.clone(), f_theta.clone()),
        }
    }

    /// `"cartesian"` or `"polar"`, for reports.
    pub fn coords_name(&self) -> &'static str {
        match self.coords {
            Coords::Cartesian(_) => "cartesian",
            Coords::Polar { .. } => "polar",
        }
    }
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum TokKind {
    /// Numeric literal; `integer` is set when the literal is a plain
    /// unsigned integer (usable as an exponent or rational part).
    Num { value: f64, integer: Option<u64> },
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Tok {
    kind: TokKind,
    col: usize,
}

/// Split an expression into tokens. `col0` is the 1-based column of the
/// first byte of `text` within its line, so token columns are absolute.
fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<Tok>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                toks.push(Tok {
                    kind: TokKind::Plus,
                    col,
                });
                i += 1;
            }
            '-' => {
                toks.push(Tok {
                    kind: TokKind::Minus,
                    col,
                });
                i += 1;
            }
            '*' => {
                toks.push(Tok {
                    kind: TokKind::Star,
                    col,
                });
                i += 1;
            }
            '^' => {
                toks.push(Tok {
                    kind: TokKind::Caret,
                    col,
                });
                i += 1;
            }
            '/' => {
                toks.push(Tok {
                    kind: TokKind::Slash,
                    col,
                });
                i += 1;
            }
            '(' => {
                toks.push(Tok {
                    kind: TokKind::LParen,
                    col,
                });
                i += 1;
            }
            ')' => {
                toks.push(Tok {
                    kind: TokKind::RParen,
                    col,
                });
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let value: f64 = lit
                    .parse()
                    .map_err(|_| err(line, col, format!("invalid number `{lit}`")))?;
                toks.push(Tok {
                    kind: TokKind::Num {
                        value,
                        integer: lit.parse::<u64>().ok(),
                    },
                    col,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Tok {
                    kind: TokKind::Ident(text[start..i].to_string()),
                    col,
                });
            }
            _ => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------
// Expression AST
// ---------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Expr {
    Num(f64),
    Var { name: String, col: usize },
    Call {
        name: String,
        arg: Box<Expr>,
        col: usize,
    },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    /// Column just past the expression, for end-of-input errors.
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end_col, |t| t.col)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokKind::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                TokKind::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokKind::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Caret)) {
            self.next();
            let col = self.here();
            match self.next().map(|t| t.kind) {
                Some(TokKind::Num {
                    integer: Some(k), ..
                }) if k <= u32::MAX as u64 => Ok(Expr::Pow(Box::new(base), k as u32)),
                _ => Err(err(
                    self.line,
                    col,
                    "exponent must be a nonnegative integer literal",
                )),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let col = self.here();
        match self.next().map(|t| t.kind) {
            Some(TokKind::Num { value, integer }) => {
                // Fold `p/q` into an exact rational literal.
                if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Slash)) {
                    let slash_col = self.here();
                    if let Some(Tok {
                        kind:
                            TokKind::Num {
                                integer: Some(q), ..
                            },
                        ..
                    }) = self.peek2()
                    {
                        let q = *q;
                        let Some(p) = integer else {
                            return Err(err(
                                self.line,
                                slash_col,
                                "rational literal requires an integer numerator",
                            ));
                        };
                        if q == 0 {
                            return Err(err(self.line, slash_col, "division by zero in rational"));
                        }
                        self.next();
                        self.next();
                        return Ok(Expr::Num(p as f64 / q as f64));
                    }
                    return Err(err(
                        self.line,
                        slash_col,
                        "`/` only joins two integer literals into a rational (p/q)",
                    ));
                }
                Ok(Expr::Num(value))
            }
            Some(TokKind::Ident(name)) => {
                if matches!(self.peek().map(|t| &t.kind), Some(TokKind::LParen)) {
                    self.next();
                    let arg = self.expr()?;
                    let close = self.here();
                    match self.next().map(|t| t.kind) {
                        Some(TokKind::RParen) => Ok(Expr::Call {
                            name,
                            arg: Box::new(arg),
                            col,
                        }),
                        _ => Err(err(self.line, close, "expected `)`")),
                    }
                } else {
                    Ok(Expr::Var { name, col })
                }
            }
            Some(TokKind::LParen) => {
                let inner = self.expr()?;
                let close = self.here();
                match self.next().map(|t| t.kind) {
                    Some(TokKind::RParen) => Ok(inner),
                    _ => Err(err(self.line, close, "expected `)`")),
                }
            }
            _ => Err(err(
                self.line,
                col,
                "expected a number, variable, or parenthesized expression",
            )),
        }
    }
}

/// Parse one right-hand-side expression to an AST.
fn parse_expr(text: &str, line: usize, col0: usize) -> Result<Expr> {
    let toks = tokenize(text, line, col0)?;
    if toks.is_empty() {
        return Err(err(line, col0, "empty expression"));
    }
    let end_col = col0 + text.len();
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col,
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        let hint = if t.kind == TokKind::Slash {
            "unexpected `/`: division only forms rational literals (p/q between integers)"
                .to_string()
        } else {
            "unexpected trailing token".to_string()
        };
        return Err(err(line, t.col, hint));
    }
    Ok(e)
}

// ---------------------------------------------------------------------
// Evaluation into polynomials / trig-radial speeds
// ---------------------------------------------------------------------

/// Interpret a cartesian variable name, checking the declared dimension.
fn var_axis(name: &str, dim: usize, line: usize, col: usize) -> Result<usize> {
    if let Some(rest) = name.strip_prefix('x') {
        if let Ok(k) = rest.parse::<usize>() {
            if k >= 1 && k <= dim {
                return Ok(k - 1);
            }
            return Err(err(
                line,
                col,
                format!("undeclared variable `{name}` (dimension is {dim})"),
            ));
        }
    }
    if name == "r" || name == "theta" {
        return Err(err(
            line,
            col,
            format!("polar variable `{name}` requires `coords = polar`"),
        ));
    }
    Err(err(
        line,
        col,
        format!("unknown variable `{name}` (expected x1..x{dim})"),
    ))
}

fn expr_to_poly(e: &Expr, dim: usize, line: usize) -> Result<MonomialPoly> {
    match e {
        Expr::Num(v) => Ok(MonomialPoly::constant(dim, Complex64::new(*v, 0.0))),
        Expr::Var { name, col } => {
            let axis = var_axis(name, dim, line, *col)?;
            let mut exps = vec![0u32; dim];
            exps[axis] = 1;
            MonomialPoly::monomial(dim, &exps, Complex64::new(1.0, 0.0))
        }
        Expr::Call { name, col, .. } => Err(err(
            line,
            *col,
            format!("`{name}(...)` is only available with `coords = polar`"),
        )),
        Expr::Neg(a) => Ok(expr_to_poly(a, dim, line)?.scale(Complex64::new(-1.0, 0.0))),
        Expr::Add(a, b) => expr_to_poly(a, dim, line)?.add(&expr_to_poly(b, dim, line)?),
        Expr::Sub(a, b) => {
            let mut lhs = expr_to_poly(a, dim, line)?;
            lhs.add_assign_scaled(&expr_to_poly(b, dim, line)?, Complex64::new(-1.0, 0.0))?;
            Ok(lhs)
        }
        Expr::Mul(a, b) => expr_to_poly(a, dim, line)?.multiply(&expr_to_poly(b, dim, line)?),
        Expr::Pow(a, k) => {
            let base = expr_to_poly(a, dim, line)?;
            let mut acc = MonomialPoly::constant(dim, Complex64::new(1.0, 0.0));
            for _ in 0..*k {
                acc = acc.multiply(&base)?;
            }
            Ok(acc)
        }
    }
}

/// Match `theta` or `<integer>*theta` inside a `cos`/`sin` argument.
fn harmonic_of(arg: &Expr) -> Option<u32> {
    match arg {
        Expr::Var { name, .. } if name == "theta" => Some(1),
        Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Num(v), Expr::Var { name, .. })
                if name == "theta" && v.fract() == 0.0 && *v >= 0.0 && *v <= u32::MAX as f64 =>
            {
                Some(*v as u32)
            }
            _ => None,
        },
        _ => None,
    }
}

fn expr_to_trig(e: &Expr, line: usize) -> Result<TrigRadial> {
    match e {
        Expr::Num(v) => Ok(TrigRadial::constant(*v)),
        Expr::Var { name, col } => match name.as_str() {
            "r" => Ok(TrigRadial::radial_power(1)),
            "theta" => Err(err(
                line,
                *col,
                "`theta` may only appear as cos(n*theta) or sin(n*theta)",
            )),
            _ => Err(err(
                line,
                *col,
                format!("`{name}` is not valid in polar components (use r, cos, sin)"),
            )),
        },
        Expr::Call { name, arg, col } => {
            let n = harmonic_of(arg).ok_or_else(|| {
                err(
                    line,
                    *col,
                    "the argument of cos/sin must be `theta` or `<integer>*theta`",
                )
            })?;
            match name.as_str() {
                "cos" => Ok(TrigRadial::cosine(n, 1.0)),
                "sin" => Ok(TrigRadial::sine(n, 1.0)),
                _ => Err(err(
                    line,
                    *col,
                    format!("unknown function `{name}` (only cos and sin)"),
                )),
            }
        }
        Expr::Neg(a) => Ok(TrigRadial::zero().add_scaled(&expr_to_trig(a, line)?, -1.0)),
        Expr::Add(a, b) => Ok(expr_to_trig(a, line)?.add_scaled(&expr_to_trig(b, line)?, 1.0)),
        Expr::Sub(a, b) => Ok(expr_to_trig(a, line)?.add_scaled(&expr_to_trig(b, line)?, -1.0)),
        Expr::Mul(a, b) => Ok(expr_to_trig(a, line)?.multiply(&expr_to_trig(b, line)?)),
        Expr::Pow(a, k) => Ok(expr_to_trig(a, line)?.powi(*k)),
    }
}

// ---------------------------------------------------------------------
// File-level parsing
// ---------------------------------------------------------------------

/// Parse a sequence of signed numbers (decimals or `p/q` rationals), as
/// used by the `box` and `guess` directives.
fn parse_number_list(text: &str, line: usize, col0: usize) -> Result<Vec<f64>> {
    let toks = tokenize(text, line, col0)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut sign = 1.0;
        if toks[i].kind == TokKind::Minus {
            sign = -1.0;
            i += 1;
        }
        match toks.get(i).map(|t| &t.kind) {
            Some(TokKind::Num { value, integer }) => {
                let mut v = *value;
                // Optional `/q` continuation for rationals.
                if matches!(toks.get(i + 1).map(|t| &t.kind), Some(TokKind::Slash)) {
                    let slash_col = toks[i + 1].col;
                    match toks.get(i + 2).map(|t| &t.kind) {
                        Some(TokKind::Num {
                            integer: Some(q), ..
                        }) if *q != 0 => {
                            if integer.is_none() {
                                return Err(err(
                                    line,
                                    slash_col,
                                    "rational literal requires an integer numerator",
                                ));
                            }
                            v /= *q as f64;
                            i += 2;
                        }
                        _ => {
                            return Err(err(
                                line,
                                slash_col,
                                "`/` only joins two integer literals into a rational (p/q)",
                            ))
                        }
                    }
                }
                out.push(sign * v);
                i += 1;
            }
            _ => {
                let col = toks.get(i).map_or(col0 + text.len(), |t| t.col);
                return Err(err(line, col, "expected a number"));
            }
        }
    }
    if out.is_empty() {
        return Err(err(line, col0, "expected at least one number"));
    }
    Ok(out)
}

struct FileState {
    dim: Option<usize>,
    polar: Option<bool>,
    components: Vec<Option<MonomialPoly>>,
    f_r: Option<TrigRadial>,
    f_theta: Option<TrigRadial>,
    region: Option<BoxMap>,
    analysis: AnalysisParams,
}

impl FileState {
    fn require_dim(&self, line: usize, col: usize, key: &str) -> Result<usize> {
        self.dim
            .ok_or_else(|| err(line, col, format!("`{key}` requires `dim = N` first")))
    }
}

fn parse_scalar<T: std::str::FromStr>(
    value: &str,
    line: usize,
    col: usize,
    what: &str,
) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| err(line, col, format!("expected {what}, got `{}`", value.trim())))
}

/// Parse a complete system-definition file.
pub fn parse_system(text: &str) -> Result<SystemDefinition> {
    let mut st = FileState {
        dim: None,
        polar: None,
        components: Vec::new(),
        f_r: None,
        f_theta: None,
        region: None,
        analysis: AnalysisParams::default(),
    };
    let mut last_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(err(line, col, "expected `key = value`"));
        };
        let key_raw = &content[..eq];
        let key = key_raw.trim();
        let key_col = key_raw.len() - key_raw.trim_start().len() + 1;
        let value = &content[eq + 1..];
        // Column of the first character after `=`; expressions keep their
        // leading spaces so token columns stay absolute.
        let expr_col = eq + 2;
        let value_col = expr_col + (value.len() - value.trim_start().len());
        let value_trim = value.trim_end();

        match key {
            "dim" => {
                if st.dim.is_some() {
                    return Err(err(line, key_col, "duplicate `dim`"));
                }
                let n: usize = parse_scalar(value, line, value_col, "a positive integer")?;
                if n == 0 {
                    return Err(err(line, value_col, "dimension must be at least 1"));
                }
                st.dim = Some(n);
                st.components = vec![None; n];
            }
            "coords" => {
                if st.polar.is_some() {
                    return Err(err(line, key_col, "duplicate `coords`"));
                }
                match value.trim() {
                    "cartesian" => st.polar = Some(false),
                    "polar" => {
                        let n = st.require_dim(line, key_col, "coords = polar")?;
                        if n != 2 {
                            return Err(err(
                                line,
                                value_col,
                                "polar coordinates require dim = 2",
                            ));
                        }
                        if st.components.iter().any(|c| c.is_some()) {
                            return Err(err(
                                line,
                                key_col,
                                "`coords` must be declared before components",
                            ));
                        }
                        st.polar = Some(true);
                    }
                    other => {
                        return Err(err(
                            line,
                            value_col,
                            format!("unknown coordinate system `{other}` (cartesian or polar)"),
                        ))
                    }
                }
            }
            "fr" | "ftheta" => {
                st.require_dim(line, key_col, key)?;
                if st.polar != Some(true) {
                    return Err(err(
                        line,
                        key_col,
                        format!("`{key}` requires `coords = polar` declared first"),
                    ));
                }
                let ast = parse_expr(value_trim, line, expr_col)?;
                let trig = expr_to_trig(&ast, line)?;
                let slot = if key == "fr" {
                    &mut st.f_r
                } else {
                    &mut st.f_theta
                };
                if slot.is_some() {
                    return Err(err(line, key_col, format!("duplicate `{key}`")));
                }
                *slot = Some(trig);
            }
            _ if key.starts_with('f')
                && key.len() > 1
                && key[1..].chars().all(|c| c.is_ascii_digit()) =>
            {
                let n = st.require_dim(line, key_col, key)?;
                if st.polar == Some(true) {
                    return Err(err(
                        line,
                        key_col,
                        format!("`{key}` is a cartesian component; polar files use fr/ftheta"),
                    ));
                }
                let i: usize = key[1..]
                    .parse()
                    .map_err(|_| err(line, key_col, format!("bad component index in `{key}`")))?;
                if i < 1 || i > n {
                    return Err(err(
                        line,
                        key_col,
                        format!("component `{key}` out of range (dimension is {n})"),
                    ));
                }
                if st.components[i - 1].is_some() {
                    return Err(err(line, key_col, format!("duplicate `{key}`")));
                }
                let ast = parse_expr(value_trim, line, expr_col)?;
                st.components[i - 1] = Some(expr_to_poly(&ast, n, line)?);
            }
            "box" => {
                let n = st.require_dim(line, key_col, "box")?;
                if st.region.is_some() {
                    return Err(err(line, key_col, "duplicate `box`"));
                }
                let nums = parse_number_list(value_trim, line, expr_col)?;
                if nums.len() != 2 * n {
                    return Err(err(
                        line,
                        value_col,
                        format!(
                            "`box` needs {} bounds (lo hi per axis), got {}",
                            2 * n,
                            nums.len()
                        ),
                    ));
                }
                let lo: Vec<f64> = nums.iter().step_by(2).copied().collect();
                let hi: Vec<f64> = nums.iter().skip(1).step_by(2).copied().collect();
                for axis in 0..n {
                    if !(hi[axis] > lo[axis]) {
                        return Err(err(
                            line,
                            value_col,
                            format!("box axis {} needs upper > lower", axis + 1),
                        ));
                    }
                }
                st.region = Some(BoxMap::new(lo, hi)?);
            }
            "method" => match value.trim() {
                "taylor" => st.analysis.method = Some(Method::Taylor),
                "bernstein" => st.analysis.method = Some(Method::Bernstein),
                other => {
                    return Err(err(
                        line,
                        value_col,
                        format!("unknown method `{other}` (taylor or bernstein)"),
                    ))
                }
            },
            "order" => {
                st.analysis.order =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "degree" => {
                st.analysis.degree =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "nbar" => {
                st.analysis.n_bar =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "stride" => {
                st.analysis.stride =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "field_degree" => {
                st.analysis.field_degree =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "delta" => st.analysis.delta = Some(parse_scalar(value, line, value_col, "a number")?),
            "e_r_norm" => {
                st.analysis.e_r_norm = Some(parse_scalar(value, line, value_col, "a number")?)
            }
            "p" => st.analysis.p = Some(parse_scalar(value, line, value_col, "a positive integer")?),
            "resolution" => {
                st.analysis.resolution =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "samples" => {
                st.analysis.samples =
                    Some(parse_scalar(value, line, value_col, "a positive integer")?)
            }
            "horizon" => {
                st.analysis.horizon = Some(parse_scalar(value, line, value_col, "a number")?)
            }
            "guess" => {
                let n = st.require_dim(line, key_col, "guess")?;
                let nums = parse_number_list(value_trim, line, expr_col)?;
                if nums.len() != n {
                    return Err(err(
                        line,
                        value_col,
                        format!("`guess` needs {n} coordinates, got {}", nums.len()),
                    ));
                }
                st.analysis.guess = Some(nums);
            }
            other => {
                return Err(err(line, key_col, format!("unknown key `{other}`")));
            }
        }
    }

    let end = last_line.max(1);
    let Some(dim) = st.dim else {
        return Err(err(end, 1, "file must declare `dim = N`"));
    };

    let coords = if st.polar == Some(true) {
        let f_r = st
            .f_r
            .ok_or_else(|| err(end, 1, "polar file is missing `fr = ...`"))?;
        let f_theta = st
            .f_theta
            .ok_or_else(|| err(end, 1, "polar file is missing `ftheta = ...`"))?;
        Coords::Polar { f_r, f_theta }
    } else {
        let mut comps = Vec::with_capacity(dim);
        for (i, c) in st.components.into_iter().enumerate() {
            comps.push(c.ok_or_else(|| {
                err(end, 1, format!("missing component `f{}`", i + 1))
            })?);
        }
        Coords::Cartesian(comps)
    };

    Ok(SystemDefinition {
        dim,
        coords,
        region: st.region,
        analysis: st.analysis,
        source: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_fold_into_exact_coefficients() {
        let def = parse_system("dim = 1\nf1 = -3/4*x1\n").unwrap();
        let Coords::Cartesian(c) = &def.coords else {
            panic!("expected cartesian")
        };
        assert_eq!(c[0].coeff(&[1]).re, -0.75);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let e = parse_system("dim = 2\nf1 = -x2\nf2 = x1 + y\n").unwrap_err();
        match e {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 3);
                assert_eq!(col, 11);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }
}
