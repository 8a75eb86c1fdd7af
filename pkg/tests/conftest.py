import pytest

from bbcreds.credential import generate_issuer_keys
from bbcreds.ecc import CodeParams
from bbcreds.parties import AgePolicy, InProcessAsp, ProtocolConfig, device_enroll
from bbcreds.synthbio import new_identity

# Fixed clock for everything time-dependent: 2025-06-15T15:20:00Z.
NOW = 1_750_000_800

SMALL_CODE = CodeParams(n=15, k=7, t=2)


@pytest.fixture(scope="session")
def issuer_keys():
    return generate_issuer_keys(seed=0xB10C5EED)


@pytest.fixture(scope="session")
def default_cfg():
    return ProtocolConfig()


@pytest.fixture()
def asp(issuer_keys):
    return InProcessAsp(issuer_keys, AgePolicy(threshold=18), now=NOW)


@pytest.fixture(scope="session")
def enrollment(issuer_keys, default_cfg):
    """One shared enrollment with the key and secret captured for audits."""
    secrets = {}
    profile = new_identity(424242, default_cfg.dim)
    record = device_enroll(
        profile,
        InProcessAsp(issuer_keys, AgePolicy(threshold=18), now=NOW),
        default_cfg,
        rng_seed=777001,
        secret_observer=lambda key, secret: secrets.update(key=key, secret=secret),
    )
    return {
        "profile": profile,
        "record": record,
        "key": secrets["key"],
        "secret": secrets["secret"],
    }
