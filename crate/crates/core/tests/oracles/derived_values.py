"""Independent arithmetic oracle for the frozen expected values in
tests/derived_values.rs. Uses mpmath at 50 digits; shares no code with the
Rust implementation. Re-run with `python3 derived_values.py`."""
from mpmath import mp, mpf, log, exp, sqrt, ceil, e, binomial, quad, fabs

mp.dps = 50

def show(name, v):
    print(f"{name:<40} {mp.nstr(v, 20)}")

# divergences
show("kl_bern_075_05", mpf("0.75") * log(mpf("1.5")) + mpf("0.25") * log(mpf("0.5")))
show("renyi2_bern_075_05", log(mpf("0.75") ** 2 / mpf("0.5") + mpf("0.25") ** 2 / mpf("0.5")))
show("uniform_tv_05_1_n2", 1 - mpf("0.5") ** 2)

# bernoulli n-fold TV via binomial enumeration, p=0.3 q=0.5 n=4
p, q, n = mpf("0.3"), mpf("0.5"), 4
show("bern_tv_n4_03_05", sum(fabs(binomial(n, k) * (p**k * (1 - p) ** (n - k) - q**k * (1 - q) ** (n - k))) for k in range(n + 1)) / 2)

# classical bounds
show("fano_classical_N3_kl0", 1 - 1 / log(3))
show("fano_classical_N16_kl05", 1 - mpf("1.5") / log(16))

# private le cam
eps = log(2)
show("lecam_dp_product_n2", (1 - (1 - exp(-eps)) * mpf("0.5")) ** 2 / 2)
show("lecam_zcdp_product_n4", (1 - 4 * sqrt(mpf("0.02") / 2) * mpf("0.5")) / 2)

# private fano, DP joint delta=0, N=8, n=1, eps=0.1, all offdiag tv 0.5
N, n, eps = 8, 1, mpf("0.1")
t = 2 * mpf("0.5") / (1 + mpf("0.5"))
S = N * (N - 1) * t
show("fano_dp_dsum", n * eps / N**2 * S)
show("fano_dp_match_branch", 1 - (1 + n * eps / N**2 * S) / log(N))
show("fano_dp_pairwise_branch", mpf(1) / 2 - (1 - exp(-n * eps)) / (2 * N**2) * S)
# zCDP joint N=3 n=1 rho=0.1, tv=1 -> t=1
N, n, rho = 3, 1, mpf("0.1")
show("fano_zcdp_N3", 1 - (1 + n**2 * rho / N**2 * (N * (N - 1) * 1)) / log(N))

# packing recipes
show("bern_dp_recipe_coef", exp(-1 / sqrt(2)) / 32)
show("uniform_nonpriv_recipe_coef", exp(-1) / 8)

# KL-quadratic packing bounds
def prop1(d, n, g, r0, kind, par=None):
    base = min(r0 / sqrt(d), 1 / (64 * sqrt(n * g)))
    if kind == "none":
        a = base
    elif kind == "dp":
        a = max(base, min(r0 / sqrt(d), sqrt(d) / (64**2 * sqrt(2) * n * par * sqrt(g))))
    else:
        a = max(base, min(r0 / sqrt(d), 1 / (64**2 * 2 * sqrt(2) * n * sqrt(par * g))))
    return a**2 * d / 32
show("prop1_zcdp_d66_n100", prop1(66, 100, mpf("0.5"), mpf(10), "zcdp", mpf("0.01")))
show("prop1_none_rinf_d66_n100_g05", prop1(66, 100, mpf("0.5"), mpf(10) ** 30, "none"))
show("prop1_none_rinf_formula", mpf(66) / (32 * 64**2 * 100 * mpf("0.5")))
show("prop1_dp_d66_n100_eps01", prop1(66, 100, mpf("0.5"), mpf(10) ** 30, "dp", mpf("0.1")))
show("prop1_tiny_r0", prop1(66, 100, mpf("0.5"), mpf("1e-4"), "none"))

# similarity functions
show("lecam_match_dH3_eps1", exp(-2) / 2)
show("zcdp_fano_match_N3_dH1", 1 - (1 + mpf("0.1") * 6 / 9) / log(3))

# group privacy: eps=ln2, delta=0.01, k=2
show("group_mult_k2", exp(2 * log(2)))
show("group_add_k2", mpf("0.01") * 2 * exp(log(2) * 1))

# VG thresholds
for d in (66, 128, 200):
    z = mpf(1) / 4
    show(f"vg_N_d{d}", ceil(exp(z**2 * d / 2)))
    show(f"vg_dist_d{d}", ceil((mpf(1) / 2 - z) * d))

# mechanisms
show("laplace_mse", mpf("0.25") / 100 + 2 / (100 * mpf("0.1")) ** 2)
show("gaussian_mse", mpf("0.25") / 100 + 4 / (100**2 * mpf("0.01")))
show("rr_keep_ln3", exp(log(3)) / (1 + exp(log(3))))
show("dpsgml_sigma2", 4 / (mpf("0.1") * 100**2))
show("dpsgml_K", ceil(2 * log(mpf("0.1") * 100**2 / 5)))

# uniform max estimator MSE by quadrature of the density n t^{n-1}/theta^n
n = 10
show("uniform_max_mse_n10", quad(lambda t: (1 - t) ** 2 * n * t ** (n - 1), [0, 1]))
show("uniform_max_mse_closed", mpf(2) / (11 * 12))

# bernoulli lower-bound constants at n=100, eps=0.1
show("bern_lb_dp_n100", 1 / (80 * (100 * mpf("0.1")) ** 2))
