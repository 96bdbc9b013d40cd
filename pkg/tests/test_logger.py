import logging

from src.cli import EXIT_OK, _main
from src.logger import ROOT_NAME, LoggerConfig, get_logger, set_console_level


def test_module_loggers_share_the_namespace():
    log = get_logger("src.fk")
    assert log.name == f"{ROOT_NAME}.fk"
    assert not log.handlers
    assert get_logger("__main__").name == ROOT_NAME


def test_handlers_installed_once():
    get_logger("src.a")
    before = list(logging.getLogger(ROOT_NAME).handlers)
    get_logger("src.b")
    assert logging.getLogger(ROOT_NAME).handlers == before


def test_verbose_flag(tmp_path, capsys):
    dirs = ["--out", str(tmp_path / "out"), "--cache-dir", str(tmp_path / "cache")]
    try:
        assert _main(["fkdet", "--group", "Z/2", "--expr", "x-2", "-v", *dirs]) == EXIT_OK
        console = logging.getLogger(ROOT_NAME).handlers[0]
        assert console.level == logging.DEBUG
    finally:
        set_console_level(LoggerConfig.LOG_LEVEL)
