"""
Tests for config.RunConfig (defaults, KEY=VALUE files, flag precedence) and logger_config.
"""
import logging
import os

import pytest

from config import DEFAULT_SEED, OUTPUT_DIR, RunConfig
from logger_config import get_default_log_file, setup_logger


class TestResolve:
    """RunConfig.resolve layering."""

    def test_defaults(self):
        """Unset flags keep the defaults."""
        rc = RunConfig.resolve({'command': 'lv', 'seed': None})
        assert rc.seed == DEFAULT_SEED
        assert rc.payoff == '5,3,1,0'
        assert rc.output_dir().endswith('lv')
        assert rc.output_dir().startswith(OUTPUT_DIR)

    def test_flags_are_coerced(self):
        """String flag values are converted to the field types."""
        rc = RunConfig.resolve({'dt': '0.5', 'samples': '12', 'drop_r_edge': 'yes'})
        assert rc.dt == 0.5
        assert rc.samples == 12
        assert rc.drop_r_edge is True

    def test_file_then_flags(self, tmp_path):
        """Flags override the config file, the file overrides defaults."""
        path = tmp_path / 'run.env'
        path.write_text('T_MAX=20\nDT=0.01\nDROP_R_EDGE=false\nCLASS_X=1214\n')
        rc = RunConfig.resolve({'dt': 0.02}, str(path))
        assert rc.t_max == 20.0
        assert rc.dt == 0.02
        assert rc.drop_r_edge is False
        assert rc.class_x == '1214'

    def test_unknown_file_key(self, tmp_path):
        """Keys that are not settings are refused."""
        path = tmp_path / 'run.env'
        path.write_text('COLOUR=blue\n')
        with pytest.raises(ValueError, match='Unknown config key'):
            RunConfig.resolve({}, str(path))

    def test_command_not_settable_from_file(self, tmp_path):
        """The command comes from the command line only."""
        path = tmp_path / 'run.env'
        path.write_text('COMMAND=lv\n')
        with pytest.raises(ValueError, match='Unknown config key'):
            RunConfig.resolve({}, str(path))

    def test_missing_file(self, tmp_path):
        """A config path that does not exist is an error."""
        with pytest.raises(FileNotFoundError):
            RunConfig.resolve({}, str(tmp_path / 'absent.env'))

    def test_bad_values(self):
        """Unparseable numbers and booleans are refused."""
        with pytest.raises(ValueError, match='Invalid value'):
            RunConfig.resolve({'samples': 'many'})
        with pytest.raises(ValueError, match='Invalid boolean'):
            RunConfig.resolve({'drop_r_edge': 'maybe'})

    def test_round_trip(self):
        """to_dict holds every field and rebuilds the same config."""
        rc = RunConfig.resolve({'command': 'sweep', 'seed': 9})
        assert RunConfig(**rc.to_dict()) == rc


class TestLogger:
    """logger_config: level from the environment, optional daily file."""

    def test_level_from_environment(self, monkeypatch):
        """PDLEARN_LOG_LEVEL sets the level, unknown names fall back to INFO."""
        monkeypatch.setenv('PDLEARN_LOG_LEVEL', 'debug')
        assert setup_logger('pdlearn_test_debug').level == logging.DEBUG
        monkeypatch.setenv('PDLEARN_LOG_LEVEL', 'chatty')
        assert setup_logger('pdlearn_test_fallback').level == logging.INFO

    def test_repeat_setup_does_not_duplicate_handlers(self):
        """Setting a logger up twice leaves a single console handler."""
        setup_logger('pdlearn_test_repeat')
        assert len(setup_logger('pdlearn_test_repeat').handlers) == 1

    def test_file_opened_on_first_record(self, monkeypatch, tmp_path):
        """The daily log file lives under PDLEARN_LOG_DIR and appears once written to."""
        monkeypatch.setenv('PDLEARN_LOG_DIR', str(tmp_path / 'logs'))
        path = get_default_log_file('dynamics')
        assert os.path.basename(path).startswith('dynamics_')
        logger = setup_logger('pdlearn_test_file', path)
        assert not os.path.exists(path)
        logger.warning('first record')
        for handler in logger.handlers:
            handler.flush()
            handler.close()
        assert 'first record' in open(path).read()

    def test_empty_log_dir_disables_file(self, monkeypatch):
        """An empty PDLEARN_LOG_DIR means console only."""
        monkeypatch.setenv('PDLEARN_LOG_DIR', '')
        assert get_default_log_file('dynamics') is None
