from pathlib import Path


def test_pyproject_script_points_to_cli_entrypoint():
    content = Path("pyproject.toml").read_text(encoding="utf-8")
    assert 'spillseg = "spillseg.interfaces.cli.main:run"' in content


def test_setuptools_includes_spillseg_package_and_defaults():
    content = Path("pyproject.toml").read_text(encoding="utf-8")
    assert 'include = ["spillseg*"]' in content
    assert '"spillseg.config.defaults" = ["*.json"]' in content
