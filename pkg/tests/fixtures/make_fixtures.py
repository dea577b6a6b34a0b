"""Regenerate the shipped bid-log fixtures: ``python3 tests/fixtures/make_fixtures.py``."""
import os
from pathlib import Path

from regret_econ import __version__
from regret_econ.auction import CtrProfile, DEFAULT_CTRS, Mechanism
from regret_econ.cli import main
from regret_econ.io import MANIFEST_PREFIX, RunManifest
from regret_econ.vcg_ne import equilibrium_bids

HERE = Path(__file__).resolve().parent
EQ_VALUES = (45.0, 39.0, 33.0, 27.0, 21.0)
EQ_TOP_BID = 30.0


def truthful_vcg() -> None:
    # run from the fixture directory so the recorded paths stay relative
    os.chdir(HERE)
    main(["simulate", "--mechanism", "vcg", "--seed", "0", "--agent", "truthful", "--out-dir", "truthful_vcg"])
    # auction-level outcomes are not needed by the tests
    (HERE / "truthful_vcg" / "outcomes.csv").unlink()


def equilibrium_log() -> None:
    # written at full float precision so the implied values round-trip exactly
    bids = equilibrium_bids(EQ_VALUES, DEFAULT_CTRS, top_bid=EQ_TOP_BID)
    man = RunManifest("fixture", [], __version__, options={"mechanism": Mechanism.GSP.value,
                                                            "values": list(EQ_VALUES),
                                                            "top_bid": EQ_TOP_BID})
    lines = [MANIFEST_PREFIX + man.to_json(), "auction_index,bidder_id,bid"]
    for t in range(1, 1501):
        lines += [f"{t},{i},{float(b)!r}" for i, b in enumerate(bids, start=1)]
    (HERE / "equilibrium_gsp.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    truthful_vcg()
    equilibrium_log()
