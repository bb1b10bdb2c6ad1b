import pytest

import aoiikit as aoii
from aoiikit.config import parse_settings_file


def test_context_restores():
    """Tests that context blocks apply and then restore settings."""
    mode = aoii.rc['gamma.mode']
    with aoii.rc.context({'gamma.mode': 'exact'}):
        assert aoii.rc['gamma.mode'] == 'exact'
        assert aoii.success_prob(10, 0.1) == pytest.approx(0.9 ** 9)
    with aoii.rc.context(gammamode='exact'):
        assert aoii.rc.gammamode == 'exact'
    assert aoii.rc['gamma.mode'] == mode


@pytest.mark.parametrize(
    'key, value, error',
    [
        ('nonsense', 1, KeyError),
        ('gamma.mode', 'poisson', ValueError),
        ('optimizer.linpoints', 0, ValueError),
        ('oracle.tol', -1.0, ValueError),
    ],
)
def test_invalid_setting(key, value, error):
    with pytest.raises(error):
        aoii.rc[key] = value


def test_category():
    kw = aoii.rc.category('optimizer')
    assert 'tol' in kw and 'rounds' in kw
    with pytest.raises(ValueError):
        aoii.rc.category('plotting')


def test_settings_file(tmp_path):
    """Tests value conversion and strict handling of settings files."""
    path = tmp_path / 'scenario.txt'
    path.write_text(
        '# comment\n'
        'M: 1000\n'
        'q_bar_M: 1e-2  # inline comment\n'
        "policy: 'random,hybrid'\n"
        'sweep.log: True\n'
        'warmup: None\n'
    )
    settings = parse_settings_file(str(path), strict=True)
    assert settings == {
        'M': 1000,
        'q_bar_M': 0.01,
        'policy': 'random,hybrid',
        'sweep.log': True,
        'warmup': None,
    }
    path.write_text('M: 10\nM: 20\n')
    with pytest.raises(ValueError, match='Duplicate'):
        parse_settings_file(str(path), strict=True)
    with pytest.warns(aoii.AoIIWarning):
        assert parse_settings_file(str(path)) == {'M': 10}


def test_save_changed_settings(tmp_path):
    """Tests that saved files hold only the changed settings uncommented."""
    path = str(tmp_path / '.aoiikitrc')
    with aoii.rc.context({'optimizer.rounds': 7}):
        aoii.rc.save(path)
    assert parse_settings_file(path) == {'optimizer.rounds': 7}
    with pytest.warns(aoii.AoIIWarning, match='backup|moved'):
        aoii.rc.save(path)
    assert (tmp_path / '.aoiikitrc.bak').exists()
    assert parse_settings_file(path) == {}
