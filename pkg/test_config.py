from dotenv import load_dotenv
load_dotenv()

import pytest

from utils.config import Settings, load_settings

VARS = (
    "MAX_STEPS",
    "INITIAL_PRECISION",
    "PRECISION_CAP",
    "ORACLE_WIDTH",
    "ORACLE_GUARD",
    "ORACLE_RETRIES",
    "JOBS",
    "VERIFY_MAX_STEPS",
    "LOG_LEVEL",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    # set-then-delete so values loaded from a test .env are undone afterwards
    for name in VARS:
        monkeypatch.setenv(f"PADIC_CF_{name}", "")
        monkeypatch.delenv(f"PADIC_CF_{name}")


def test_defaults(tmp_path):
    assert load_settings(tmp_path / ".env") == Settings()


def test_env_file(tmp_path):
    env = tmp_path / ".env"
    env.write_text("PADIC_CF_MAX_STEPS=500\nPADIC_CF_LOG_LEVEL=debug\n", encoding="utf-8")
    settings = load_settings(env)
    assert settings.max_steps == 500
    assert settings.log_level == "DEBUG"
    assert settings.precision_cap == 1 << 20


def test_environment_overrides_file(tmp_path, monkeypatch):
    env = tmp_path / ".env"
    env.write_text("PADIC_CF_JOBS=2\n", encoding="utf-8")
    monkeypatch.setenv("PADIC_CF_JOBS", "4")
    assert load_settings(env).jobs == 4


@pytest.mark.parametrize("name, value", [("MAX_STEPS", "many"), ("JOBS", "0"), ("ORACLE_GUARD", "4")])
def test_bad_values(tmp_path, monkeypatch, name, value):
    monkeypatch.setenv(f"PADIC_CF_{name}", value)
    with pytest.raises(RuntimeError, match=f"PADIC_CF_{name}"):
        load_settings(tmp_path / ".env")
