"""Throughput, note-density, and streamability analysis.

The central question: at a generation rate of R tokens/second and an upfront
playback buffer of b seconds, what fraction of musical time stays ahead of
playback?  A moment t is streamable when the tokens generated by wall time
t + b cover the tokens playback has consumed by musical time t:
R x (t + b) >= C(t), where C(t) counts 3 tokens for every note with onset
<= t.  C jumps at onset instants — a note's tokens must exist before it
sounds — and durations never contribute.
"""

import csv
import json
import time
from dataclasses import dataclass

import numpy as np

from .decoding import GenParams
from .streamer import CHUNK_NOTES, next_chunk, start_stream
from .vocab import DEFAULT_VOCAB


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Throughput:
    tokens: int
    wall_s: float

    @property
    def tok_s(self) -> float:
        return self.tokens / max(self.wall_s, 1e-3)  # degenerate-clock guard

    @property
    def notes_s(self) -> float:
        return self.tok_s / 3

    def to_dict(self) -> dict:
        return {
            "tokens": self.tokens,
            "wall_s": self.wall_s,
            "tok_s": self.tok_s,
            "notes_s": self.notes_s,
        }


def measure_throughput(tokens: int, wall_s: float) -> Throughput:
    """Generation rate from a finished run (weight-load time excluded by
    the caller's choice of interval)."""
    return Throughput(tokens=tokens, wall_s=wall_s)


def _horizon_of(notes) -> float:
    """Musical length of one generation: last onset + that note's duration."""
    last = max(notes, key=lambda n: n.onset_s)
    return last.onset_s + last.duration_s


@dataclass(frozen=True)
class DensityProfile:
    """Playback tok/s over musical time, aggregated across generations.

    Per 1-second bin: mean and population stdev of 3 x (notes whose onset
    falls in the bin); generations that never reach a bin count as 0 there.
    """

    bin_s: float
    bin_starts: np.ndarray
    mean_tok_s: np.ndarray
    stdev_tok_s: np.ndarray
    n: np.ndarray
    horizon_s: float
    n_generations: int

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_start_s", "mean_tok_s", "stdev_tok_s", "n"])
            for row in zip(self.bin_starts, self.mean_tok_s, self.stdev_tok_s, self.n):
                writer.writerow([f"{row[0]:g}", repr(float(row[1])), repr(float(row[2])), int(row[3])])

    @classmethod
    def from_csv(cls, path: str) -> "DensityProfile":
        starts, means, stds, ns = [], [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                starts.append(float(row["bin_start_s"]))
                means.append(float(row["mean_tok_s"]))
                stds.append(float(row["stdev_tok_s"]))
                ns.append(int(row["n"]))
        if not starts:
            raise EmptyInput(f"no density rows in {path}")
        bin_s = starts[1] - starts[0] if len(starts) > 1 else 1.0
        return cls(
            bin_s=bin_s,
            bin_starts=np.array(starts),
            mean_tok_s=np.array(means),
            stdev_tok_s=np.array(stds),
            n=np.array(ns),
            horizon_s=starts[-1] + bin_s,
            n_generations=int(ns[0]) if ns else 0,
        )


def estimate_density(generations, horizon_s: "float | None" = None, bin_s: float = 1.0) -> DensityProfile:
    """Empirical playback tok/s distribution across generations."""
    if not generations:
        raise EmptyInput("no generations")
    for i, gen in enumerate(generations):
        if not gen:
            raise EmptyInput(f"generation {i} is empty")
    if horizon_s is None:
        horizon_s = max(_horizon_of(gen) for gen in generations)
    n_bins = max(1, int(np.ceil(horizon_s / bin_s - 1e-9)))
    counts = np.zeros((len(generations), n_bins))
    for gi, gen in enumerate(generations):
        for note in gen:
            b = int(note.onset_s / bin_s)
            if b < n_bins:
                counts[gi, b] += 1
    tok = 3.0 * counts / bin_s
    return DensityProfile(
        bin_s=bin_s,
        bin_starts=np.arange(n_bins) * bin_s,
        mean_tok_s=tok.mean(axis=0),
        stdev_tok_s=tok.std(axis=0, ddof=0),
        n=np.full(n_bins, len(generations), dtype=int),
        horizon_s=float(horizon_s),
        n_generations=len(generations),
    )


@dataclass(frozen=True)
class StreamabilityReport:
    R_tok_s: float
    buffer_s: float
    fraction: float  # primary: pooled across generations
    fraction_mean: float  # alternative reading: mean of per-generation fractions
    per_generation: "list[float]"
    aggregation: str = "pooled"

    def to_dict(self) -> dict:
        return {
            "R_tok_s": self.R_tok_s,
            "buffer_s": self.buffer_s,
            "fraction": self.fraction,
            "fraction_mean": self.fraction_mean,
            "aggregation": self.aggregation,
            "per_generation": self.per_generation,
        }


def _streamable_seconds(onsets, horizon: float, R: float, b: float) -> float:
    """Lebesgue measure of {t in [0, horizon) : R(t+b) >= C(t)}.

    C is constant between onsets, so each segment contributes the part at
    or after C/R - b.  Exact, no time grid.
    """
    total = 0.0
    prev = 0.0
    for k, bound in enumerate(list(onsets) + [horizon]):
        seg_end = min(bound, horizon)
        if seg_end > prev:
            required = 3 * k  # notes sounded by any t in [prev, seg_end)
            first_ok = required / R - b
            total += seg_end - min(max(prev, first_ok), seg_end)
            prev = seg_end
        if prev >= horizon:
            break
    return total


def streamable_fraction(generations, R: float, b: float, horizon_s: "float | None" = None) -> StreamabilityReport:
    """Streamable share of musical time at generation rate R with buffer b.

    Accepts raw generations (exact event-level computation; pooled across
    generations, with the per-generation mean also reported) or a
    DensityProfile (single aggregate curve from binned means).
    """
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if b < 0:
        raise ValueError(f"buffer must be >= 0, got {b}")
    if isinstance(generations, DensityProfile):
        return _profile_fraction(generations, R, b)
    if not generations:
        raise EmptyInput("no generations")

    fractions = []
    ok_total = 0.0
    time_total = 0.0
    for i, gen in enumerate(generations):
        if not gen:
            raise EmptyInput(f"generation {i} is empty")
        onsets = sorted(n.onset_s for n in gen)
        horizon = horizon_s if horizon_s is not None else _horizon_of(gen)
        ok = _streamable_seconds(onsets, horizon, R, b)
        fractions.append(ok / horizon)
        ok_total += ok
        time_total += horizon
    return StreamabilityReport(
        R_tok_s=R,
        buffer_s=b,
        fraction=ok_total / time_total,
        fraction_mean=float(np.mean(fractions)),
        per_generation=fractions,
        aggregation="pooled",
    )


def _profile_fraction(profile: DensityProfile, R: float, b: float) -> StreamabilityReport:
    """Streamable fraction of the aggregate mean-density curve.

    C(t) is piecewise linear here (constant density inside each bin), so
    the R(t+b) - C(t) crossing is solved per bin.
    """
    total = 0.0
    C = 0.0
    for start, mean in zip(profile.bin_starts, profile.mean_tok_s):
        end = min(start + profile.bin_s, profile.horizon_s)
        if end <= start:
            break
        # over [start, end): C(t) = C + mean * (t - start); need R(t+b) >= C(t)
        slack0 = R * (start + b) - C
        slack1 = R * (end + b) - (C + mean * (end - start))
        if slack0 >= 0 and slack1 >= 0:
            total += end - start
        elif slack0 < 0 and slack1 < 0:
            pass
        else:
            # one sign change: linear crossing at fraction |slack0| / (|slack0| + |slack1|)
            cross = start + (end - start) * abs(slack0) / (abs(slack0) + abs(slack1))
            total += (end - cross) if slack0 < 0 else (cross - start)
        C += mean * (end - start)
    fraction = total / profile.horizon_s
    return StreamabilityReport(
        R_tok_s=R,
        buffer_s=b,
        fraction=fraction,
        fraction_mean=fraction,
        per_generation=[],
        aggregation="profile-mean",
    )


def profile_run(
    engine,
    params: GenParams,
    n_generations: int,
    notes_per_generation: int = CHUNK_NOTES,
    buffers=(0.0, 2.0),
    rate_override: "float | None" = None,
    vocab=DEFAULT_VOCAB,
) -> dict:
    """The full analysis: generate, time, bin densities, score streamability.

    Each generation is one fresh from-scratch chunk with its own seed.
    Throughput counts generation wall time only (no setup).  The streamable
    fractions use the measured rate unless rate_override pins R (for
    re-running the arithmetic at a published rate).
    """
    generations = []
    total_notes = 0
    wall = 0.0
    base_seed = params.seed if params.seed is not None else 0
    for i in range(n_generations):
        state = start_stream(engine, params.merged({"seed": base_seed + i}), vocab=vocab)
        t0 = time.perf_counter()
        chunk = next_chunk(state, max_notes=notes_per_generation)
        wall += time.perf_counter() - t0
        generations.append(chunk.notes)
        total_notes += len(chunk.notes)

    throughput = measure_throughput(3 * total_notes, wall)
    R = rate_override if rate_override is not None else throughput.tok_s
    density = estimate_density(generations)
    reports = [streamable_fraction(generations, R, b) for b in buffers]
    return {
        "n_generations": n_generations,
        "notes_per_generation": notes_per_generation,
        "throughput": throughput.to_dict(),
        "rate_override": rate_override,
        "R_tok_s": R,
        "R_notes_s": R / 3,
        "density": {
            "bin_s": density.bin_s,
            "horizon_s": density.horizon_s,
            "bins": [
                {"bin_start_s": float(s), "mean_tok_s": float(m), "stdev_tok_s": float(sd), "n": int(n)}
                for s, m, sd, n in zip(
                    density.bin_starts, density.mean_tok_s, density.stdev_tok_s, density.n
                )
            ],
        },
        "streamability": [r.to_dict() for r in reports],
        "params": params.to_dict(),
        "_density_profile": density,
        "_generations": generations,
    }


def write_report(report: dict, json_path: "str | None" = None, csv_path: "str | None" = None) -> None:
    """Persist a profile_run result: JSON report and/or density CSV."""
    if csv_path is not None:
        report["_density_profile"].to_csv(csv_path)
    if json_path is not None:
        clean = {k: v for k, v in report.items() if not k.startswith("_")}
        with open(json_path, "w") as fh:
            json.dump(clean, fh, indent=1)


def plot_density(profile: DensityProfile, png_path: str, title: str = "Playback token rate") -> None:
    """Mean playback tok/s per bin with a shaded +-1 stdev band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = profile.bin_starts + profile.bin_s / 2
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(x, profile.mean_tok_s, lw=1.5, label="mean")
    ax.fill_between(
        x,
        np.maximum(profile.mean_tok_s - profile.stdev_tok_s, 0),
        profile.mean_tok_s + profile.stdev_tok_s,
        alpha=0.3,
        label="+-1 stdev",
    )
    ax.set_xlabel("musical time (s)")
    ax.set_ylabel("playback tok/s")
    ax.set_title(f"{title} (n={profile.n_generations})")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
