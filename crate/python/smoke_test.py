"""Smoke test for the depnet_py extension.

Build the module first, e.g. with `maturin develop -m crates/python/Cargo.toml`
or `cargo build --release -p depnet-py --features extension-module` followed by
copying `target/release/libdepnet_py.so` to `depnet_py.so` on the Python path.
"""

import math
import os
import tempfile

import depnet_py as dp


def main():
    data = dp.generate("nonlinear_ar_sqrt", 200, seed=4)
    assert len(data["x"]) == 200 and len(data["oracle"]) == 200

    net = dp.Network.mlp(1, 8, 2, seed=1)
    assert net.widths == [1, 8, 8, 1]
    fit = dp.train(net, data["x"], data["y"], max_epochs=200, seed=2)
    trained = fit["network"]
    assert fit["epochs_run"] == len(fit["valid_mse"])
    assert min(fit["valid_mse"]) == fit["valid_mse"][fit["best_epoch"]]
    pred = trained.predict(data["x"][150:])
    assert len(pred) == 50 and all(math.isfinite(p) for p in pred)
    back = dp.Network.from_json(trained.to_json())
    assert back.predict(data["x"][:5]) == trained.predict(data["x"][:5])

    replica = dp.Network.linear_replica([0.5, -1.5])
    assert abs(replica.forward([2.0, 1.0]) - (-0.5)) < 1e-12

    ar = dp.generate("linear_ar", 1600, seed=3, coeffs=[0.6, -0.4, 0.2])
    series = [row[0] for row in ar["x"]]
    assert dp.aic_select_lag(series, 4) in range(1, 5)
    assert dp.theoretical_lag(100, 1.0) == 10
    assert abs(dp.phi_n([2.0], [4], 10000) - 0.01) < 1e-15
    assert dp.sis_screen([[1.0, 0.3], [2.0, 0.1], [3.0, 0.2]], [1.0, 2.0, 3.0], 50.0) == [0]

    ols = dp.fit_ols([[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0])
    assert abs(ols["coefficients"][0] - 1.0) < 1e-12 and abs(ols["coefficients"][1] - 2.0) < 1e-12

    cfg = 'model = "linear_ar"\ncoeffs = [0.6]\nn_grid = [100, 200]\nreplicates = 2\nmax_epochs = 50\nd_max = 3\n'
    risks, boxes = dp.run_experiment(cfg)
    assert risks == dp.run_experiment(cfg)[0]
    assert risks.splitlines()[0].startswith("model_id,n,replicate")
    slope, _, r2 = dp.rate(risks, "ols")
    assert math.isfinite(slope) and 0.0 <= r2 <= 1.0

    cpi = [100.0 * math.exp(0.002 * k + 0.001 * math.sin(k)) for k in range(200)]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "panel.csv")
        with open(path, "w") as f:
            f.write("date,cpi\n")
            for k, c in enumerate(cpi):
                f.write(f"{1990 + k // 12}-{k % 12 + 1:02d},{c!r}\n")
        text, mse = dp.forecast(path, window=120, train_len=80, max_forecasts=5)
    assert len(text.splitlines()) == 6 and math.isfinite(mse)
    assert len(dp.inflation_transform(cpi)) == 199

    print("depnet_py smoke test ok")


if __name__ == "__main__":
    main()
