"""Quantifying load-shape variability with entropy.

Runs the full pipeline on a temperature-responsive corpus with planted
household effects, then reads back every analytics product: entropy by
stratum (day type, season, summer temperature quartiles), per-household
entropy, characteristic entropy deltas with bootstrap CIs, the kWh
coverage curve, the peak taxonomy, and the occurrence map series.

Run:  python3 demos/03_variability_analytics.py
"""

import tempfile
import warnings
from pathlib import Path

import numpy as np

from loadshapes import GeneratorConfig, RunConfig, generate_synthetic, run_pipeline

warnings.simplefilter("ignore")

work = Path(tempfile.mkdtemp(prefix="loadshapes_demo_"))
config = GeneratorConfig(
    archetypes=5, households=200, days=365,
    noise_level=0.25, temperature_response=1.0,
    entropy_bias={"electric_dryer": 0.4, "elderly": -0.3},
    bad_day_rate=0.06,
)
corpus = generate_synthetic(config, seed=1234)
paths = corpus.write(work / "corpus")
print(f"corpus written to {work / 'corpus'} "
      f"({config.households} households x {config.days} days)")

run_config = RunConfig(
    meter=str(paths["meter"]),
    weather=str(paths["weather"]),
    survey=str(paths["survey"]),
    out=str(work / "out"),
    seed=99,
    sample=50_000,
)
result = run_pipeline(run_config)
print("pipeline stages:", ", ".join(f"{r.stage}={r.status}" for r in result.results))
out = work / "out"


def rows_of(name):
    for line in (out / name).read_text().splitlines():
        if not line.startswith("#"):
            yield line.split(",")


# --- entropy by stratum ------------------------------------------------------

print("\nentropy by stratum (nats; higher = more variable schedules):")
for axis, label, n, ent in rows_of("entropy_by_stratum.csv"):
    if axis == "axis":
        continue
    print(f"  {axis:12s} {label:8s} n={int(n):6d}  S={float(ent):.3f}")
print("  -> hotter summer days concentrate usage on fewer shapes, so")
print("     entropy falls monotonically from T_1 to T_4; the temperature")
print("     spread dwarfs the season spread, which dwarfs day-of-week.")

# --- households and characteristics -------------------------------------------

entropies = {}
for row in rows_of("household_entropy.csv"):
    if row[0] != "household_id":
        entropies[row[0]] = float(row[1])
values = np.array(list(entropies.values()))
print(f"\nper-household entropy: min {values.min():.2f}, "
      f"median {np.median(values):.2f}, max {values.max():.2f}")

print("\ncharacteristic entropy deltas (with - without, 95% bootstrap CI):")
for row in rows_of("char_deltas.csv"):
    if row[0] == "indicator":
        continue
    name, delta, lo, hi = row[0], float(row[1]), float(row[2]), float(row[3])
    marker = ""
    if name in config.entropy_bias:
        marker = f"   <- planted {config.entropy_bias[name]:+.1f}"
    print(f"  {name:24s} {delta:+.3f}  [{lo:+.3f}, {hi:+.3f}]{marker}")
print("  (deltas are measured against a truncated dictionary, so planted")
print("   effects reappear compressed but with the planted ordering)")

# --- coverage and peaks --------------------------------------------------------

print("\nkWh coverage curve:")
for row in rows_of("coverage_curve.csv"):
    if row[0] == "rank":
        continue
    print(f"  rank {row[0]}: shape {row[1]} cumulative {float(row[3]):.1%}")

print("\npeak taxonomy of dictionary shapes:")
for row in rows_of("taxonomy.csv"):
    if row[0] == "cluster_id":
        continue
    print(f"  shape {row[0]}: {row[2]:6s} peak(s) at hours [{row[3]}], "
          f"primary in '{row[5]}' window")

# --- occurrence map -------------------------------------------------------------

lines = [r for r in rows_of("occurrence_map.csv")]
header, body = lines[0], lines[1:]
temp_row = next(r for r in body if r[0] == "daily_mean_temp_f")
ent_row = next(r for r in body if r[0] == "daily_entropy")
temps = np.array([float(x) for x in temp_row[1:]])
ents = np.array([float(x) for x in ent_row[1:]])
r = np.corrcoef(temps, ents)[0, 1]
print(f"\noccurrence map: {len(body) - 2} households x {len(header) - 1} days")
print(f"daily temperature vs daily entropy correlation: r = {r:+.2f} "
      "(hot days -> concentrated usage)")
