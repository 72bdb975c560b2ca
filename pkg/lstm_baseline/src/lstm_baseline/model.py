"""Windowed LSTM forecaster for option price feature tables.

The input is a feature CSV with header ``quote_id,date,close,sigma,r``
(close = the quote's closing price, sigma = trailing historical volatility,
r = short rate). Rows are cut into fixed-length windows, standardized with
statistics fitted on the chronological training slice only, and fed to a
from-scratch LSTM (gate equations implemented directly, trained by
backpropagation through time with Adam). Predictions are written back out as
``quote_id,predicted_price`` in original price units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ValidationError

FEATURE_NAMES = ("price", "historical_volatility", "interest_rate")
FEATURE_HEADER = ["quote_id", "date", "close", "sigma", "r"]
DEFAULT_WINDOW = 30
TRAIN_FRACTION = 0.8


# ---------------------------------------------------------------------------
# feature table


@dataclass(frozen=True)
class FeatureTable:
    """Time-ordered feature rows keyed by quote id.

    Ids must be strictly increasing; a jump of more than one marks a gap in
    the underlying history, and no training window may straddle it.
    """

    quote_ids: tuple[int, ...]
    dates: tuple[str, ...]
    values: np.ndarray  # (rows, features) in FEATURE_NAMES order

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != len(FEATURE_NAMES):
            raise ValidationError(
                f"values must be (rows, {len(FEATURE_NAMES)}), got {values.shape}"
            )
        if not (len(self.quote_ids) == len(self.dates) == values.shape[0]):
            raise ValidationError("quote_ids, dates and values must align")
        if len(self.quote_ids) == 0:
            raise ValidationError("feature table is empty")
        if any(q < 0 for q in self.quote_ids):
            raise ValidationError("quote ids must be non-negative")
        if any(b <= a for a, b in zip(self.quote_ids, self.quote_ids[1:])):
            raise ValidationError("quote ids must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature values must be finite")

    def __len__(self) -> int:
        return len(self.quote_ids)


def load_features(path: str | Path) -> FeatureTable:
    """Read a ``quote_id,date,close,sigma,r`` CSV into a FeatureTable."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"features file not found: {path}")
    quote_ids: list[int] = []
    dates: list[str] = []
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FEATURE_HEADER:
            raise ValidationError(
                f"bad features header {header!r}, expected {FEATURE_HEADER!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValidationError(f"line {line_no}: expected 5 fields, got {len(row)}")
            try:
                quote_ids.append(int(row[0]))
                rows.append([float(row[2]), float(row[3]), float(row[4])])
            except ValueError as exc:
                raise ValidationError(f"line {line_no}: {exc}") from exc
            if not row[1]:
                raise ValidationError(f"line {line_no}: empty date")
            dates.append(row[1])
    if not rows:
        raise ValidationError(f"no data rows in {path}")
    return FeatureTable(
        quote_ids=tuple(quote_ids), dates=tuple(dates), values=np.array(rows)
    )


# ---------------------------------------------------------------------------
# windowing


@dataclass(frozen=True)
class WindowedDataset:
    """Standardized sliding windows and their next-day price targets.

    Each input window covers ``window`` consecutive rows and ends the day
    before its target row; the target is the scaled price feature of that
    next row. ``mean``/``std`` are the standardization parameters, fitted on
    the rows visible to the chronological training slice only. Constant
    features keep std 1.0 so scaling stays invertible.
    """

    inputs: np.ndarray  # (samples, window, features), scaled
    targets: np.ndarray  # (samples,), scaled price
    quote_ids: tuple[int, ...]  # target row ids, one per sample
    mean: np.ndarray  # (features,)
    std: np.ndarray  # (features,)
    train_count: int
    window: int
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        n_features = len(self.feature_names)
        if inputs.ndim != 3 or inputs.shape[2] != n_features:
            raise ValidationError(f"inputs must be (samples, window, {n_features})")
        if inputs.shape[1] != self.window:
            raise ValidationError(
                f"window mismatch: inputs have {inputs.shape[1]}, field says {self.window}"
            )
        if targets.shape != (inputs.shape[0],):
            raise ValidationError("one target per sample required")
        if len(self.quote_ids) != inputs.shape[0]:
            raise ValidationError("one quote id per sample required")
        if inputs.shape[0] == 0:
            raise ValidationError("dataset has no samples")
        if not (1 <= self.train_count <= inputs.shape[0]):
            raise ValidationError(
                f"train_count must be in [1, {inputs.shape[0]}], got {self.train_count}"
            )
        if self.mean.shape != (n_features,) or self.std.shape != (n_features,):
            raise ValidationError("mean and std must have one entry per feature")
        if np.any(self.std <= 0.0):
            raise ValidationError("std entries must be positive")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ValidationError("dataset arrays must be finite")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def unscale_inputs(self, scaled: np.ndarray) -> np.ndarray:
        """Map scaled feature windows back to original units."""
        return np.asarray(scaled, dtype=float) * self.std + self.mean

    def unscale_price(self, scaled: np.ndarray) -> np.ndarray:
        """Map scaled price values back to price units."""
        return np.asarray(scaled, dtype=float) * self.std[0] + self.mean[0]


def build_windows(table: FeatureTable, window: int = DEFAULT_WINDOW) -> WindowedDataset:
    """Cut a feature table into standardized windows with next-row targets.

    A sample needs ``window + 1`` rows with consecutive quote ids (window
    plus target); spans crossing an id gap are dropped. On a gapless table
    the sample count is exactly ``rows - window``.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    n_rows = len(table)
    if n_rows <= window:
        raise ValidationError(
            f"series too short: need more than {window} rows, got {n_rows}"
        )
    ids = np.asarray(table.quote_ids, dtype=int)
    consecutive = np.diff(ids) == 1
    starts = [
        k for k in range(n_rows - window) if bool(np.all(consecutive[k : k + window]))
    ]
    if not starts:
        raise ValidationError("every candidate window crosses a quote-id gap")

    samples = len(starts)
    train_count = max(1, int(TRAIN_FRACTION * samples))
    # fit scaling on rows the training slice can see: its windows and targets
    last_visible = starts[train_count - 1] + window
    train_rows = table.values[: last_visible + 1]
    mean = train_rows.mean(axis=0)
    std = train_rows.std(axis=0)
    # constant columns leave float-noise stds; pin those to 1.0 so scaling
    # stays invertible instead of amplifying rounding error
    scale = np.maximum(np.abs(mean), 1.0)
    std = np.where(std > 1e-12 * scale, std, 1.0)

    scaled = (table.values - mean) / std
    inputs = np.stack([scaled[k : k + window] for k in starts])
    targets = np.array([scaled[k + window, 0] for k in starts])
    quote_ids = tuple(int(ids[k + window]) for k in starts)
    return WindowedDataset(
        inputs=inputs,
        targets=targets,
        quote_ids=quote_ids,
        mean=mean,
        std=std,
        train_count=train_count,
        window=window,
    )


# ---------------------------------------------------------------------------
# the recurrent cell


@dataclass(frozen=True)
class LstmConfig:
    """Architecture and optimization settings."""

    hidden_units: int = 64
    layers: int = 1
    epochs: int = 50
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValidationError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.layers < 1:
            raise ValidationError(f"layers must be >= 1, got {self.layers}")
        # epochs may be zero: that is the documented untrained-model path
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if not (self.learning_rate > 0.0 and math.isfinite(self.learning_rate)):
            raise ValidationError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )


@dataclass(frozen=True)
class LstmWeights:
    """One recurrent layer: four gate affine maps over [x_t, h_prev]."""

    w_f: np.ndarray  # (hidden, in + hidden)
    w_i: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray  # candidate-state map
    b_f: np.ndarray  # (hidden,)
    b_i: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        shape = self.w_f.shape
        hidden = self.hidden
        if len(shape) != 2 or shape[1] <= hidden:
            raise ValidationError(f"gate matrices must be (hidden, in+hidden), got {shape}")
        for name in ("w_i", "w_o", "w_g"):
            if getattr(self, name).shape != shape:
                raise ValidationError(f"{name} must have shape {shape}")
        for name in ("b_f", "b_i", "b_o", "b_g"):
            if getattr(self, name).shape != (hidden,):
                raise ValidationError(f"{name} must have shape ({hidden},)")

    @property
    def hidden(self) -> int:
        return self.w_f.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.w_f.shape[1] - self.w_f.shape[0]


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_cell_step(
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    weights: LstmWeights,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance the cell one step; returns (h_t, c_t).

    Gates: f_t, i_t, o_t = sigmoid(affine([x_t, h_prev])); the candidate
    state is tanh(affine); c_t = f_t*c_prev + i_t*candidate;
    h_t = o_t*tanh(c_t). Accepts a single step vector or a batch.
    """
    x_t = np.asarray(x_t, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x_t.shape[:-1] != h_prev.shape[:-1] or h_prev.shape != c_prev.shape:
        raise ValidationError(
            f"batch shapes disagree: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape}"
        )
    if x_t.shape[-1] != weights.n_inputs:
        raise ValidationError(
            f"x_t has {x_t.shape[-1]} features, weights expect {weights.n_inputs}"
        )
    if h_prev.shape[-1] != weights.hidden:
        raise ValidationError(
            f"h_prev has {h_prev.shape[-1]} units, weights expect {weights.hidden}"
        )
    z = np.concatenate([x_t, h_prev], axis=-1)
    f_t = sigmoid(z @ weights.w_f.T + weights.b_f)
    i_t = sigmoid(z @ weights.w_i.T + weights.b_i)
    o_t = sigmoid(z @ weights.w_o.T + weights.b_o)
    candidate = np.tanh(z @ weights.w_g.T + weights.b_g)
    c_t = f_t * c_prev + i_t * candidate
    h_t = o_t * np.tanh(c_t)
    return h_t, c_t


# ---------------------------------------------------------------------------
# the full model


@dataclass
class LstmModel:
    """Stacked recurrent layers plus a scalar dense readout of the last step."""

    layers: tuple[LstmWeights, ...]
    dense_w: np.ndarray  # (hidden,)
    dense_b: float
    config: LstmConfig

    def predict_scaled(self, inputs: np.ndarray) -> np.ndarray:
        """Predictions in scaled target space for (samples, window, features)."""
        preds, _ = _forward(self, np.asarray(inputs, dtype=float))
        return preds


def init_model(config: LstmConfig, n_features: int) -> LstmModel:
    """Seeded small-uniform initialization; scale 1/sqrt(fan-in) per matrix."""
    if n_features < 1:
        raise ValidationError(f"n_features must be >= 1, got {n_features}")
    rng = np.random.default_rng(config.seed)
    layers = []
    in_dim = n_features
    hidden = config.hidden_units
    for _ in range(config.layers):
        bound = 1.0 / math.sqrt(in_dim + hidden)
        mats = [
            rng.uniform(-bound, bound, size=(hidden, in_dim + hidden))
            for _ in range(4)
        ]
        layers.append(
            LstmWeights(
                w_f=mats[0], w_i=mats[1], w_o=mats[2], w_g=mats[3],
                b_f=np.zeros(hidden), b_i=np.zeros(hidden),
                b_o=np.zeros(hidden), b_g=np.zeros(hidden),
            )
        )
        in_dim = hidden
    bound = 1.0 / math.sqrt(hidden)
    dense_w = rng.uniform(-bound, bound, size=hidden)
    return LstmModel(layers=tuple(layers), dense_w=dense_w, dense_b=0.0, config=config)


def _forward(model: LstmModel, inputs: np.ndarray):
    """Run all layers over the sequence; cache per-step values for backprop."""
    if inputs.ndim != 3:
        raise ValidationError(f"inputs must be (samples, window, features), got {inputs.shape}")
    n, t_steps, _ = inputs.shape
    caches = []
    seq = inputs
    for weights in model.layers:
        hidden = weights.hidden
        h = np.zeros((n, hidden))
        c = np.zeros((n, hidden))
        steps = []
        outputs = np.empty((n, t_steps, hidden))
        for t in range(t_steps):
            x_t = seq[:, t, :]
            z = np.concatenate([x_t, h], axis=-1)
            f_t = sigmoid(z @ weights.w_f.T + weights.b_f)
            i_t = sigmoid(z @ weights.w_i.T + weights.b_i)
            o_t = sigmoid(z @ weights.w_o.T + weights.b_o)
            g_t = np.tanh(z @ weights.w_g.T + weights.b_g)
            c_new = f_t * c + i_t * g_t
            tanh_c = np.tanh(c_new)
            h_new = o_t * tanh_c
            steps.append((z, f_t, i_t, o_t, g_t, c, tanh_c))
            h, c = h_new, c_new
            outputs[:, t, :] = h
        caches.append((seq, steps))
        seq = outputs
    preds = seq[:, -1, :] @ model.dense_w + model.dense_b
    return preds, (caches, seq)


def _zero_grads(model: LstmModel) -> list[dict[str, np.ndarray]]:
    grads = []
    for weights in model.layers:
        grads.append(
            {name: np.zeros_like(getattr(weights, name)) for name in _GATE_PARAMS}
        )
    return grads


_GATE_PARAMS = ("w_f", "w_i", "w_o", "w_g", "b_f", "b_i", "b_o", "b_g")


def _backward(model: LstmModel, cache, d_preds: np.ndarray):
    """Backpropagation through time over every layer; returns all gradients."""
    caches, final_seq = cache
    n, t_steps, hidden = final_seq.shape
    d_dense_w = final_seq[:, -1, :].T @ d_preds
    d_dense_b = float(d_preds.sum())
    layer_grads = _zero_grads(model)
    # gradient flowing into each layer's output sequence; top layer only
    # receives signal at the final step, through the dense readout
    d_out = np.zeros((n, t_steps, hidden))
    d_out[:, -1, :] = np.outer(d_preds, model.dense_w)
    for idx in range(len(model.layers) - 1, -1, -1):
        weights = model.layers[idx]
        seq, steps = caches[idx]
        in_dim = seq.shape[2]
        grads = layer_grads[idx]
        d_in = np.zeros_like(seq)
        dh_next = np.zeros((n, weights.hidden))
        dc_next = np.zeros((n, weights.hidden))
        for t in range(t_steps - 1, -1, -1):
            z, f_t, i_t, o_t, g_t, c_prev, tanh_c = steps[t]
            dh = d_out[:, t, :] + dh_next
            do = dh * tanh_c
            dc = dc_next + dh * o_t * (1.0 - tanh_c * tanh_c)
            df = dc * c_prev
            di = dc * g_t
            dg = dc * i_t
            dc_next = dc * f_t
            da_f = df * f_t * (1.0 - f_t)
            da_i = di * i_t * (1.0 - i_t)
            da_o = do * o_t * (1.0 - o_t)
            da_g = dg * (1.0 - g_t * g_t)
            grads["w_f"] += da_f.T @ z
            grads["w_i"] += da_i.T @ z
            grads["w_o"] += da_o.T @ z
            grads["w_g"] += da_g.T @ z
            grads["b_f"] += da_f.sum(axis=0)
            grads["b_i"] += da_i.sum(axis=0)
            grads["b_o"] += da_o.sum(axis=0)
            grads["b_g"] += da_g.sum(axis=0)
            dz = da_f @ weights.w_f + da_i @ weights.w_i
            dz += da_o @ weights.w_o + da_g @ weights.w_g
            d_in[:, t, :] = dz[:, :in_dim]
            dh_next = dz[:, in_dim:]
        d_out = d_in
    return layer_grads, d_dense_w, d_dense_b


class _Adam:
    """Standard Adam over a flat list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        scale = math.sqrt(1.0 - self.beta2**self.t) / (1.0 - self.beta1**self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * scale * m / (np.sqrt(v) + self.eps)


def train(dataset: WindowedDataset, config: LstmConfig) -> tuple[LstmModel, list[float]]:
    """Fit the model on the chronological training slice of the dataset.

    Full-batch gradient descent on mean squared error with Adam. The loss
    history holds one pre-update training MSE per epoch, so its length
    equals ``config.epochs`` and entry 0 is the untrained model's loss.
    Deterministic for a fixed config and dataset. A non-finite loss aborts
    with diagnostics.
    """
    model = init_model(config, dataset.inputs.shape[2])
    history: list[float] = []
    if config.epochs == 0:
        return model, history
    inputs = dataset.inputs[: dataset.train_count]
    targets = dataset.targets[: dataset.train_count]
    params: list[np.ndarray] = []
    for weights in model.layers:
        params.extend(getattr(weights, name) for name in _GATE_PARAMS)
    params.append(model.dense_w)
    dense_b_box = np.array([model.dense_b])
    params.append(dense_b_box)
    opt = _Adam(params, config.learning_rate)
    n = inputs.shape[0]
    for epoch in range(config.epochs):
        model.dense_b = float(dense_b_box[0])
        preds, cache = _forward(model, inputs)
        residual = preds - targets
        # an overflowing squared error is the divergence signal, not a bug
        with np.errstate(over="ignore"):
            loss = float(np.mean(residual * residual))
        if not math.isfinite(loss):
            raise DivergenceError(
                f"training diverged at epoch {epoch}: loss={loss!r}, "
                f"max |prediction|={float(np.max(np.abs(preds)))!r}, "
                f"learning_rate={config.learning_rate}"
            )
        history.append(loss)
        d_preds = 2.0 * residual / n
        layer_grads, d_dense_w, d_dense_b = _backward(model, cache, d_preds)
        flat_grads: list[np.ndarray] = []
        for grads in layer_grads:
            flat_grads.extend(grads[name] for name in _GATE_PARAMS)
        flat_grads.append(d_dense_w)
        flat_grads.append(np.array([d_dense_b]))
        opt.step(flat_grads)
    model.dense_b = float(dense_b_box[0])
    return model, history


# ---------------------------------------------------------------------------
# prediction export


def predict_to_file(
    model: LstmModel, dataset: WindowedDataset, path: str | Path
) -> int:
    """Write ``quote_id,predicted_price`` rows for every sample, in price units."""
    preds = dataset.unscale_price(model.predict_scaled(dataset.inputs))
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quote_id", "predicted_price"])
        for quote_id, value in zip(dataset.quote_ids, preds):
            writer.writerow([quote_id, repr(float(value))])
    return len(preds)
