//! C ABI for `matchbandit`.
//!
//! Every fallible function returns an [`MbStatus`]. On failure the message is
//! kept per thread and can be read with [`mb_last_error_message`]. Objects are
//! opaque handles that must be released with their `_free` function; strings
//! returned by the library are released with [`mb_string_free`].
//!
//! Matchings cross the boundary as `int64_t` arrays of length `n_players`,
//! holding the arm index of each player or `-1` when unmatched.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use matchbandit::harness::{
    run_spec, write_experiment_dir, ExperimentOutput, ExperimentSpec, ProxySettings,
};
use matchbandit::market::{gale_shapley, is_stable, max_player_regret, ArmId, Matching, Proposer};
use matchbandit::simulator::snapshot_metrics;
use matchbandit::{Episode, EpisodeConfig, Error, GeneratorKind, GeneratorSpec, PreferenceProfile};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Parse = 4,
    Config = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MbGeneratorKind {
    Uniform = 0,
    BetaHeterogeneous = 1,
    EdgeCorrelated = 2,
}

/// Cross-run averages at one snapshot round.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MbAggregatePoint {
    pub t: u64,
    pub stability_rate: f64,
    pub mean_max_regret: f64,
    pub mean_conflicts: f64,
}

/// Summary of the round just played by [`mb_episode_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MbRoundSummary {
    pub round: u64,
    pub conflicts: usize,
    pub matched: usize,
    pub stable: bool,
    pub max_regret: f64,
}

pub struct MbProfile(PreferenceProfile);

pub struct MbEpisode(Episode);

pub struct MbExperiment {
    points: Vec<(String, ExperimentOutput)>,
    proxy: ProxySettings,
}

struct Failure(MbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) => MbStatus::InvalidInput,
            Error::Config(_) => MbStatus::Config,
            Error::Parse(_) => MbStatus::Parse,
            Error::Io(_) => MbStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(MbStatus::Parse, e.to_string())
    }
}

impl From<toml::de::Error> for Failure {
    fn from(e: toml::de::Error) -> Self {
        Failure(MbStatus::Parse, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            MbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(MbStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(MbStatus::InvalidInput, e.to_string()))?;
    put(out, c.into_raw(), "out")
}

fn write_assignment(m: &Matching, out: *mut i64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < m.n_players() {
        return Err(Failure(
            MbStatus::BufferTooSmall,
            format!("buffer holds {len} entries, need {}", m.n_players()),
        ));
    }
    let buf = unsafe { std::slice::from_raw_parts_mut(out, m.n_players()) };
    for (slot, p) in buf.iter_mut().zip(0..) {
        *slot = m
            .arm_of(matchbandit::PlayerId(p))
            .map_or(-1, |a| a.0 as i64);
    }
    Ok(())
}

fn read_assignment(
    profile: &PreferenceProfile,
    ptr: *const i64,
    len: usize,
) -> Result<Matching, Failure> {
    if ptr.is_null() {
        return Err(null("assignment"));
    }
    if len != profile.n_players() {
        return Err(Failure(
            MbStatus::InvalidInput,
            format!(
                "assignment has {len} entries, market has {} players",
                profile.n_players()
            ),
        ));
    }
    let raw = unsafe { std::slice::from_raw_parts(ptr, len) };
    let mut assignment = Vec::with_capacity(len);
    for &a in raw {
        assignment.push(match a {
            -1 => None,
            a if a >= 0 => Some(ArmId(a as usize)),
            a => {
                return Err(Failure(
                    MbStatus::InvalidInput,
                    format!("arm index {a} is negative"),
                ))
            }
        });
    }
    Ok(Matching::from_assignment(assignment, profile.n_arms())?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mb_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Draws a preference profile.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_profile_generate(
    kind: MbGeneratorKind,
    n_players: usize,
    n_arms: usize,
    beta: f64,
    seed: u64,
    out: *mut *mut MbProfile,
) -> MbStatus {
    guard(|| {
        let kind = match kind {
            MbGeneratorKind::Uniform => GeneratorKind::Uniform,
            MbGeneratorKind::BetaHeterogeneous => GeneratorKind::BetaHeterogeneous,
            MbGeneratorKind::EdgeCorrelated => GeneratorKind::EdgeCorrelated,
        };
        let profile = GeneratorSpec {
            kind,
            n_players,
            n_arms,
            beta,
            seed,
        }
        .generate()?;
        put(out, Box::into_raw(Box::new(MbProfile(profile))), "out")
    })
}

/// Parses a profile from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_profile_from_json(
    json: *const c_char,
    out: *mut *mut MbProfile,
) -> MbStatus {
    guard(|| {
        let profile: PreferenceProfile = serde_json::from_str(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(MbProfile(profile))), "out")
    })
}

/// Serializes a profile to JSON; free the result with `mb_string_free`.
///
/// # Safety
/// `profile` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_profile_to_json(
    profile: *const MbProfile,
    out: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let p = obj(profile, "profile")?;
        put_string(out, serde_json::to_string(&p.0)?)
    })
}

/// # Safety
/// `profile` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_profile_free(profile: *mut MbProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// # Safety
/// `profile` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mb_profile_size(
    profile: *const MbProfile,
    n_players: *mut usize,
    n_arms: *mut usize,
) -> MbStatus {
    guard(|| {
        let p = obj(profile, "profile")?;
        put(n_players, p.0.n_players(), "n_players")?;
        put(n_arms, p.0.n_arms(), "n_arms")
    })
}

/// Runs deferred acceptance. `arms_propose` selects the player-pessimal
/// matching. `out` needs room for `n_players` entries.
///
/// # Safety
/// `profile` must be a live handle and `out` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_gale_shapley(
    profile: *const MbProfile,
    arms_propose: bool,
    out: *mut i64,
    len: usize,
) -> MbStatus {
    guard(|| {
        let p = obj(profile, "profile")?;
        let side = if arms_propose {
            Proposer::Arms
        } else {
            Proposer::Players
        };
        write_assignment(&gale_shapley(&p.0, side), out, len)
    })
}

/// # Safety
/// `assignment` must point to `len` readable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_is_stable(
    profile: *const MbProfile,
    assignment: *const i64,
    len: usize,
    out: *mut bool,
) -> MbStatus {
    guard(|| {
        let p = obj(profile, "profile")?;
        let m = read_assignment(&p.0, assignment, len)?;
        put(out, is_stable(&p.0, &m), "out")
    })
}

/// Largest per-player shortfall against the player-pessimal stable matching.
///
/// # Safety
/// `assignment` must point to `len` readable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_max_player_regret(
    profile: *const MbProfile,
    assignment: *const i64,
    len: usize,
    out: *mut f64,
) -> MbStatus {
    guard(|| {
        let p = obj(profile, "profile")?;
        let m = read_assignment(&p.0, assignment, len)?;
        put(out, max_player_regret(&p.0, &m), "out")
    })
}

/// Builds an episode from an episode config in TOML. When `profile` is not
/// NULL the episode runs on that market instead of generating one.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `profile` NULL or live.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_new(
    config_toml: *const c_char,
    profile: *const MbProfile,
    out: *mut *mut MbEpisode,
) -> MbStatus {
    guard(|| {
        let config: EpisodeConfig = toml::from_str(text(config_toml, "config_toml")?)?;
        let episode = match profile.as_ref() {
            Some(p) => Episode::with_profile(&config, p.0.clone())?,
            None => Episode::new(&config)?,
        };
        put(out, Box::into_raw(Box::new(MbEpisode(episode))), "out")
    })
}

/// Plays one round. Returns `MB_STATUS_INVALID_INPUT` once the horizon is
/// reached. `summary` may be NULL.
///
/// # Safety
/// `episode` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_step(
    episode: *mut MbEpisode,
    summary: *mut MbRoundSummary,
) -> MbStatus {
    guard(|| {
        let e = obj_mut(episode, "episode")?;
        if e.0.is_finished() {
            return Err(Failure(
                MbStatus::InvalidInput,
                "episode already finished".into(),
            ));
        }
        e.0.step();
        if let Some(s) = summary.as_mut() {
            let outcome = e.0.last_outcome().expect("outcome after step");
            let m = snapshot_metrics(e.0.profile(), outcome);
            *s = MbRoundSummary {
                round: outcome.round,
                conflicts: m.conflicts,
                matched: outcome.matching.matched_count(),
                stable: m.stable,
                max_regret: m.max_regret,
            };
        }
        Ok(())
    })
}

/// Plays every remaining round.
///
/// # Safety
/// `episode` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_run(episode: *mut MbEpisode) -> MbStatus {
    guard(|| {
        let e = obj_mut(episode, "episode")?;
        while !e.0.is_finished() {
            e.0.step();
        }
        Ok(())
    })
}

/// # Safety
/// `episode` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_round(
    episode: *const MbEpisode,
    round: *mut u64,
    finished: *mut bool,
) -> MbStatus {
    guard(|| {
        let e = obj(episode, "episode")?;
        put(round, e.0.round(), "round")?;
        put(finished, e.0.is_finished(), "finished")
    })
}

/// Current matching; all `-1` before the first round.
///
/// # Safety
/// `out` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_matching(
    episode: *const MbEpisode,
    out: *mut i64,
    len: usize,
) -> MbStatus {
    guard(|| {
        let e = obj(episode, "episode")?;
        let p = e.0.profile();
        let empty;
        let m = match e.0.last_outcome() {
            Some(o) => &o.matching,
            None => {
                empty = Matching::empty(p.n_players(), p.n_arms());
                &empty
            }
        };
        write_assignment(m, out, len)
    })
}

/// Snapshots recorded so far, as a JSON array.
///
/// # Safety
/// `episode` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_snapshots_json(
    episode: *const MbEpisode,
    out: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let e = obj(episode, "episode")?;
        put_string(out, serde_json::to_string(e.0.snapshots())?)
    })
}

/// # Safety
/// `episode` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_episode_free(episode: *mut MbEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}

/// Runs an experiment spec given as TOML. `workers` overrides the spec's
/// worker count when nonzero.
///
/// # Safety
/// `spec_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_run(
    spec_toml: *const c_char,
    workers: usize,
    out: *mut *mut MbExperiment,
) -> MbStatus {
    guard(|| {
        let mut spec = ExperimentSpec::from_toml(text(spec_toml, "spec_toml")?)?;
        if workers > 0 {
            spec.workers = workers;
        }
        let points = run_spec(&spec)?;
        let x = MbExperiment {
            points,
            proxy: spec.proxy,
        };
        put(out, Box::into_raw(Box::new(x)), "out")
    })
}

/// Number of sweep points.
///
/// # Safety
/// `experiment` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_points(
    experiment: *const MbExperiment,
    out: *mut usize,
) -> MbStatus {
    guard(|| {
        let x = obj(experiment, "experiment")?;
        put(out, x.points.len(), "out")
    })
}

/// Label of a sweep point; free with `mb_string_free`.
///
/// # Safety
/// `experiment` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_label(
    experiment: *const MbExperiment,
    point: usize,
    out: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let x = obj(experiment, "experiment")?;
        let (label, _) = point_at(x, point)?;
        put_string(out, label.clone())
    })
}

fn point_at(x: &MbExperiment, point: usize) -> Result<&(String, ExperimentOutput), Failure> {
    x.points.get(point).ok_or_else(|| {
        Failure(
            MbStatus::InvalidInput,
            format!(
                "point {point} out of range, experiment has {}",
                x.points.len()
            ),
        )
    })
}

/// Copies the aggregate series of one sweep point. Always stores the series
/// length in `written`; fails with `MB_STATUS_BUFFER_TOO_SMALL` when `len` is
/// short, so a first call with `len = 0` sizes the buffer.
///
/// # Safety
/// `out` must point to `len` writable entries (may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_aggregate(
    experiment: *const MbExperiment,
    point: usize,
    out: *mut MbAggregatePoint,
    len: usize,
    written: *mut usize,
) -> MbStatus {
    guard(|| {
        let x = obj(experiment, "experiment")?;
        let (_, output) = point_at(x, point)?;
        let series = &output.aggregate;
        put(written, series.len(), "written")?;
        if len < series.len() {
            return Err(Failure(
                MbStatus::BufferTooSmall,
                format!("buffer holds {len} points, need {}", series.len()),
            ));
        }
        if series.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let buf = std::slice::from_raw_parts_mut(out, series.len());
        for (slot, p) in buf.iter_mut().zip(series) {
            *slot = MbAggregatePoint {
                t: p.t,
                stability_rate: p.stability_rate,
                mean_max_regret: p.mean_max_regret,
                mean_conflicts: p.mean_conflicts,
            };
        }
        Ok(())
    })
}

/// Writes every sweep point's CSV and JSON files under `dir`, one
/// subdirectory per label.
///
/// # Safety
/// `experiment` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_write(
    experiment: *const MbExperiment,
    dir: *const c_char,
) -> MbStatus {
    guard(|| {
        let x = obj(experiment, "experiment")?;
        let root = Path::new(text(dir, "dir")?);
        for (label, output) in &x.points {
            write_experiment_dir(&root.join(label), label, output, x.proxy)?;
        }
        Ok(())
    })
}

/// # Safety
/// `experiment` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_experiment_free(experiment: *mut MbExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}
