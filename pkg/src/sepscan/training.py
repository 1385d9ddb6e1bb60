"""Losses, metrics, optimizer, schedule, and the toy training loop.

The training objective is negative scale-invariant SNR, made
permutation-invariant by scoring both speaker assignments and keeping
the better one. Evaluation metrics mirror the loss in plain numpy and
add a scale-fitted SDR; both are reported as improvement over using the
mixture itself as the estimate.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import numerics as nm
from .errors import TrainingDiverged
from .numerics import NumericsError, Tensor

SI_SNR_EPS = 1e-8
SI_SNR_CAP_DB = 80.0
_LOG10 = math.log(10.0)


# ---------------------------------------------------------------------------
# differentiable loss
# ---------------------------------------------------------------------------


def _dot(a: Tensor, b: Tensor) -> Tensor:
    return nm.tsum(nm.mul(a, b))


def _inv_rms(x: Tensor, eps: float) -> Tensor:
    """1 / sqrt(mean(x^2) + eps) as a 0-d graph node (exp/log for sqrt)."""
    power = nm.mul(_dot(x, x), Tensor(np.asarray(1.0 / x.shape[0])))
    return nm.exp(nm.mul(nm.log(nm.add(power, Tensor(np.asarray(eps)))),
                         Tensor(np.asarray(-0.5))))


def si_snr(est: Tensor, ref: Tensor, eps: float = SI_SNR_EPS) -> Tensor:
    """Scale-invariant SNR in dB between 1-D waveforms, as a graph node.

    Both signals are mean-centered, the estimate is projected onto the
    reference, and the energy ratio is measured in dB. The value is
    capped at 80 dB so a perfect reconstruction cannot push the loss to
    infinity; eps in both numerator and denominator keeps the log and
    the division finite for silent inputs.
    """
    if est.ndim != 1 or ref.ndim != 1 or est.shape != ref.shape:
        raise NumericsError(
            f"si_snr expects matching 1-D waveforms, got {est.shape} vs {ref.shape}")
    if not np.any(ref.data - ref.data.mean()):
        raise NumericsError("si_snr: reference is constant (zero energy)")
    e = nm.sub(est, nm.tmean(est))
    r = nm.sub(ref, nm.tmean(ref))
    # unit-power normalization first, so the eps terms below see a
    # scale-free estimate and invariance to est gain holds to rounding
    e = nm.mul(e, _inv_rms(e, eps))
    ref_energy = _dot(r, r)
    scale = nm.div(_dot(e, r), nm.add(ref_energy, Tensor(np.asarray(eps))))
    target = nm.mul(scale, r)
    noise = nm.sub(e, target)
    ratio = nm.div(nm.add(_dot(target, target), Tensor(np.asarray(eps))),
                   nm.add(_dot(noise, noise), Tensor(np.asarray(eps))))
    val = nm.mul(nm.log(ratio), Tensor(np.asarray(10.0 / _LOG10)))
    # cap = CAP - relu(CAP - val), differentiable and flat above the cap
    cap = Tensor(np.asarray(SI_SNR_CAP_DB))
    return nm.sub(cap, nm.relu(nm.sub(cap, val)))


def pit_loss(est: tuple[Tensor, ...], ref: tuple[Tensor, ...]
             ) -> tuple[Tensor, tuple[int, ...]]:
    """Permutation-invariant negative SI-SNR.

    Returns (loss, perm) where perm maps estimate index -> reference
    index for the winning assignment. Only the winning branch stays in
    the graph, so gradients follow the chosen permutation.
    """
    if len(est) != len(ref):
        raise NumericsError(f"pit_loss: {len(est)} estimates vs {len(ref)} references")
    best_loss: Tensor | None = None
    best_perm: tuple[int, ...] | None = None
    inv = Tensor(np.asarray(-1.0 / len(est)))
    for perm in permutations(range(len(ref))):
        total: Tensor | None = None
        for i, j in enumerate(perm):
            s = si_snr(est[i], ref[j])
            total = s if total is None else nm.add(total, s)
        loss = nm.mul(total, inv)
        if best_loss is None or loss.item() < best_loss.item():
            best_loss, best_perm = loss, perm
    return best_loss, best_perm


# ---------------------------------------------------------------------------
# numpy metrics
# ---------------------------------------------------------------------------


def si_snr_value(est: np.ndarray, ref: np.ndarray, eps: float = SI_SNR_EPS) -> float:
    e = np.asarray(est, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    e = e - e.mean()
    r = r - r.mean()
    e = e / math.sqrt(float(e @ e) / e.size + eps)
    scale = float(e @ r) / (float(r @ r) + eps)
    target = scale * r
    noise = e - target
    return 10.0 * math.log10((float(target @ target) + eps)
                             / (float(noise @ noise) + eps))


def sdr_value(est: np.ndarray, ref: np.ndarray, eps: float = SI_SNR_EPS) -> float:
    """SNR after fitting the single best gain to the estimate."""
    e = np.asarray(est, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    beta = float(e @ r) / (float(e @ e) + eps)
    err = beta * e - r
    return 10.0 * math.log10((float(r @ r) + eps) / (float(err @ err) + eps))


def best_permutation(est: tuple, ref: tuple) -> tuple[int, ...]:
    """Assignment (estimate index -> reference index) maximizing mean SI-SNR."""
    best, best_perm = -math.inf, None
    for perm in permutations(range(len(ref))):
        mean = sum(si_snr_value(est[i], ref[j]) for i, j in enumerate(perm)) / len(ref)
        if mean > best:
            best, best_perm = mean, perm
    return best_perm


def _improvement(metric, est: tuple, ref: tuple, mix: np.ndarray) -> float:
    perm = best_permutation(est, ref)
    score = sum(metric(est[i], ref[j]) for i, j in enumerate(perm)) / len(ref)
    base = sum(metric(mix, r) for r in ref) / len(ref)
    return score - base


def si_snri(est: tuple, ref: tuple, mix: np.ndarray) -> float:
    """SI-SNR improvement over the mixture, under the PIT-optimal assignment."""
    return _improvement(si_snr_value, est, ref, mix)


def sdri(est: tuple, ref: tuple, mix: np.ndarray) -> float:
    """Scale-fitted SDR improvement, sharing the SI-SNR-optimal assignment."""
    return _improvement(sdr_value, est, ref, mix)


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------


class Adam:
    """Adam with bias correction over named parameter lists."""

    def __init__(self, params: list[tuple[str, Tensor]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.params]
        self.v = [np.zeros_like(p.data) for _, p in self.params]

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for (name, p), m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite gradient for '{name}'")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainSchedule:
    """Linear warmup from zero to the peak, then cosine decay to 10%."""

    peak_lr: float = 1.5e-4
    warmup_steps: int = 100
    total_steps: int = 2000

    def __post_init__(self):
        if not (0 <= self.warmup_steps <= self.total_steps):
            raise NumericsError("schedule: need 0 <= warmup_steps <= total_steps")

    def lr(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.peak_lr * step / self.warmup_steps
        floor = 0.1 * self.peak_lr
        if step >= self.total_steps:
            return floor
        span = self.total_steps - self.warmup_steps
        progress = (step - self.warmup_steps) / span
        return floor + (self.peak_lr - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# mixtures
# ---------------------------------------------------------------------------


@dataclass
class MixExample:
    mix: np.ndarray
    sources: tuple[np.ndarray, np.ndarray]
    snr_db: float


def mix_sources(s1: np.ndarray, s2: np.ndarray, snr_db: float,
                peak: float = 0.9) -> MixExample:
    """Mix two sources at a chosen first-vs-second SNR, peak-normalized.

    The first source keeps unit gain while the second is scaled so the
    energy ratio matches snr_db; then one common gain brings the mixture
    peak to `peak`, applied to the sources too so mix == sum(sources)
    stays exact.
    """
    a = np.asarray(s1, dtype=np.float64)
    b = np.asarray(s2, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise NumericsError(f"mix_sources expects matching 1-D arrays, "
                            f"got {a.shape} vs {b.shape}")
    rms_a = math.sqrt(float(a @ a) / a.size)
    rms_b = math.sqrt(float(b @ b) / b.size)
    if rms_a == 0.0 or rms_b == 0.0:
        raise NumericsError("mix_sources: silent source")
    g2 = (rms_a / rms_b) * 10.0 ** (-snr_db / 20.0)
    sa, sb = a.copy(), g2 * b
    top = float(np.max(np.abs(sa + sb)))
    if top > 0.0:
        c = peak / top
        sa, sb = c * sa, c * sb
    # sum the scaled sources so mix == sum(sources) holds bit-exactly
    return MixExample(mix=sa + sb, sources=(sa, sb), snr_db=float(snr_db))


def sample_snr(rng: np.random.Generator, lo: float = 0.0, hi: float = 5.0) -> float:
    return float(rng.uniform(lo, hi))


# ---------------------------------------------------------------------------
# toy training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    steps_run: int
    final_loss: float
    final_si_snri: float
    history: list[dict] = field(repr=False, default_factory=list)


def _eval_si_snri(model, examples: list[MixExample]) -> float:
    vals = []
    for ex in examples:
        est = model.separate(ex.mix)
        vals.append(si_snri(tuple(e.data for e in est), ex.sources, ex.mix))
    return float(np.mean(vals))


def train_toy(model, examples: list[MixExample], schedule: TrainSchedule,
              steps: int | None = None, log_path=None, val_every: int = 25,
              stop_at_si_snri: float | None = None,
              time_budget_s: float | None = None,
              verbose: bool = False) -> TrainResult:
    """Overfit a model to a handful of fixed mixtures, full batch.

    Each step averages the permutation-invariant loss over all examples,
    backpropagates once, and applies one Adam update at the scheduled
    rate. Validation (SI-SNR improvement on the same examples) runs
    every `val_every` steps; training stops early once it reaches
    `stop_at_si_snri` or the optional wall-clock budget runs out.
    Writes a CSV log with columns step,lr,loss,si_snri when `log_path`
    is given. Raises TrainingDiverged on a non-finite loss or gradient.
    """
    if not examples:
        raise NumericsError("train_toy: no examples")
    opt = Adam(model.named_parameters())
    total = schedule.total_steps if steps is None else steps
    refs = [tuple(Tensor(np.asarray(s, dtype=np.float64)) for s in ex.sources)
            for ex in examples]
    history: list[dict] = []
    t0 = time.monotonic()
    val = -math.inf
    loss_val = math.nan
    writer = None
    log_file = None
    if log_path is not None:
        log_file = open(log_path, "w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(["step", "lr", "loss", "si_snri"])
    try:
        for step in range(total):
            lr = schedule.lr(step)
            opt.zero_grad()
            try:
                total_loss: Tensor | None = None
                for ex, ref in zip(examples, refs):
                    est = model.separate(ex.mix)
                    loss, _ = pit_loss(est, ref)
                    total_loss = (loss if total_loss is None
                                  else nm.add(total_loss, loss))
                mean_loss = nm.mul(total_loss,
                                   Tensor(np.asarray(1.0 / len(examples))))
                loss_val = mean_loss.item()
                if not math.isfinite(loss_val):
                    raise TrainingDiverged(f"loss became non-finite at step {step}")
                mean_loss.backward()
                opt.step(lr)
            except NumericsError as exc:
                # weights left an evaluable state (e.g. delta overflowed):
                # that is divergence, not a caller error
                raise TrainingDiverged(
                    f"model state became invalid at step {step}: {exc}") from exc

            is_val_step = (step % val_every == val_every - 1) or step == total - 1
            if is_val_step:
                val = _eval_si_snri(model, examples)
            row = {"step": step, "lr": lr, "loss": loss_val,
                   "si_snri": val if is_val_step else ""}
            history.append(row)
            if writer is not None:
                writer.writerow([row["step"], f"{lr:.8g}", f"{loss_val:.6f}",
                                 f"{val:.4f}" if is_val_step else ""])
            if verbose and (is_val_step or step % val_every == 0):
                print(f"step {step:5d}  lr {lr:.2e}  loss {loss_val:+.3f}"
                      + (f"  si_snri {val:+.2f} dB" if is_val_step else ""),
                      flush=True)
            if stop_at_si_snri is not None and val >= stop_at_si_snri:
                break
            if time_budget_s is not None and time.monotonic() - t0 > time_budget_s:
                break
    finally:
        if log_file is not None:
            log_file.close()
    if not math.isinf(val) or not history:
        final_val = val if not math.isinf(val) else _eval_si_snri(model, examples)
    else:
        final_val = _eval_si_snri(model, examples)
    return TrainResult(steps_run=len(history), final_loss=loss_val,
                       final_si_snri=final_val, history=history)
