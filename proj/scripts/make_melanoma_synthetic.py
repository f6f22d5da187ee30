"""Writes data/melanoma_synthetic.csv: 246 simulated subjects with the column
layout of a two-arm immunotherapy melanoma cohort. All values are synthetic."""

import csv
import pathlib

import numpy as np

rng = np.random.default_rng(20240611)
n_combo, n_pd1 = 118, 128
n = n_combo + n_pd1

treatment = np.r_[np.ones(n_combo, int), np.zeros(n_pd1, int)]
rng.shuffle(treatment)
age = np.clip(rng.normal(60.3, 14.7, n), 18, 95).round(0)
gender = np.array(["F"] * 92 + ["M"] * 154)
rng.shuffle(gender)
ctdna = np.exp(rng.normal(2.1, 0.8, n)).round(2)
tmb = np.exp(rng.normal(2.6, 1.0, n)).round(1)

# ctDNA modifies the treatment effect; TMB is mildly prognostic only.
z = (ctdna - np.median(ctdna)) / ctdna.std()
eta = 0.02 * (age - 60) + 0.1 * (gender == "M") - 0.1 * np.log(tmb) - 0.3 * treatment + 0.6 * treatment * z
t = rng.exponential(1.0 / (0.02 * np.exp(eta)))
c = rng.uniform(5, 60, n)
os_time = np.minimum(t, c).round(2)
os_event = (t <= c).astype(int)
p = 1 / (1 + np.exp(-(0.3 + 0.5 * treatment - 0.7 * treatment * z - 0.01 * (age - 60))))
orr = rng.binomial(1, p)

out = pathlib.Path(__file__).resolve().parent.parent / "data" / "melanoma_synthetic.csv"
with out.open("w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["id", "treatment", "ctDNA", "TMB", "age", "gender", "os_time", "os_event", "orr"])
    for i in range(n):
        w.writerow([f"S{i + 1:03d}", treatment[i], ctdna[i], tmb[i], int(age[i]), gender[i],
                    os_time[i], os_event[i], orr[i]])
