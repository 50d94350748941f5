import runpy
from pathlib import Path

import pytest

from schoutenlab import cli

DEMOS = Path(__file__).resolve().parent.parent / "demos"


@pytest.mark.parametrize("script", sorted(p.name for p in DEMOS.glob("*.py")))
def test_demo_runs(script, capsys):
    runpy.run_path(str(DEMOS / script), run_name="__main__")
    assert capsys.readouterr().out


@pytest.mark.parametrize(
    "command,config,code",
    [
        ("eigenvalue", "cylinder_eigenvalue.ini", 0),
        ("diagnostics", "solved_diagnostics.ini", 0),
        ("eigenvalue", "flat_background.ini", cli.EXIT_ADMISSIBILITY),
    ],
)
def test_sample_configs(command, config, code, tmp_path):
    assert cli.main([command, "--config", str(DEMOS / "configs" / config), "--out", str(tmp_path)]) == code
