"""Flat dotted-key configuration: ``section.key = value`` text files.

Lines are ``key = value`` with ``#`` comments and blank lines ignored. Values
are parsed as bool (``true``/``false``), int, float, or string, in that order.
Unknown keys are rejected loudly — silent typos in experiment configs are how
ablations go wrong.
"""

from __future__ import annotations

DEFAULTS: dict[str, object] = {
    # model geometry
    "model.feat_dim": 13,           # data.phone_inventory + 1 silence dimension
    "model.dim": 32,
    "model.joint_dim": 32,
    "model.ae_layers": 1,
    "model.causal": True,
    "model.downsample": 1,          # frame stride after the first AE layer (1 = off)
    "model.token_embed_dim": 16,
    # lookahead conditioning
    "lookahead.enabled": True,
    "lookahead.w": 3,
    "lookahead.lambda_iam": 1.0,
    "lookahead.window_embed_dim": 12,
    "lookahead.hidden_dim": 32,
    "lookahead.max_horizon_frames": 0,  # 0 = unlimited
    # decoding
    "decode.mode": "beam",
    "decode.beam_size": 8,
    "decode.max_symbols_per_frame": 8,
    # training
    "train.epochs": 8,
    "train.base_lr": 0.004,
    "train.warmup_steps": 300,
    "train.seed": 0,
    "train.checkpoint_every_epochs": 1,
    "train.adam_beta1": 0.9,
    "train.adam_beta2": 0.999,
    "train.adam_eps": 1e-8,
    # metrics
    "metrics.rare_threshold": 20,
    # synthetic data
    "data.seed": 0,
    "data.phone_inventory": 12,
    "data.n_words": 24,
    "data.n_rare_words": 6,
    "data.word_len_min": 2,
    "data.word_len_max": 4,
    "data.utt_len_min": 3,
    "data.utt_len_max": 5,
    "data.frames_per_phone_min": 1,
    "data.frames_per_phone_max": 1,
    "data.silence_frames": 1,
    "data.noise_sigma": 0.2,
    "data.confusion_rate": 0.05,
    "data.kappa": 2.0,
    "data.n_train": 2000,
    "data.n_test_in": 150,
    "data.n_test_rare": 150,
    "data.rare_train_min": 3,
    "data.rare_train_max": 12,
}


class ConfigError(ValueError):
    pass


def _parse_value(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(value)
    return out


class Config:
    """Defaults overlaid with file/CLI overrides; unknown keys rejected."""

    def __init__(self, overrides: dict[str, object] | None = None):
        self._values = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            self.set(key, value)

    def set(self, key: str, value: object) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        default = DEFAULTS[key]
        # ints are acceptable where floats are expected, not vice versa
        if isinstance(default, bool) != isinstance(value, bool):
            raise ConfigError(f"{key}: expected bool, got {value!r}")
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if type(value) is not type(default):
            raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}")
        self._values[key] = value

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key: {key!r}") from None

    def to_dict(self) -> dict[str, object]:
        return dict(self._values)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, encoding="utf-8") as f:
            return cls(parse_config_text(f.read()))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for key in sorted(self._values):
                value = self._values[key]
                if isinstance(value, bool):
                    value = "true" if value else "false"
                f.write(f"{key} = {value}\n")
