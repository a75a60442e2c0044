import pytest

from fixedb.kernels import bartlett, quadratic


@pytest.fixture(scope="session")
def bartlett_kernel():
    return bartlett()


@pytest.fixture(scope="session")
def quadratic_kernel():
    return quadratic()


@pytest.fixture(scope="session")
def tables_dir(tmp_path_factory):
    """Persisted default quantile tables (10^6 eigen draws per kernel),
    built once per session through the same path the CLI uses."""
    from fixedb.cli import _load_or_build_table

    path = tmp_path_factory.mktemp("tables")
    _load_or_build_table("bartlett", path)
    _load_or_build_table("quadratic", path)
    return path


@pytest.fixture(scope="session")
def default_tables(tables_dir):
    from fixedb.cli import _load_or_build_table

    return {k: _load_or_build_table(k, tables_dir)
            for k in ("bartlett", "quadratic")}
