"""
Tests for project directory structure validation.
Ensures all required directories and files exist.
"""
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent


def test_core_directories_exist():
    """Test that all core directories exist."""
    required_dirs = [
        "core",
        "adapters",
        "config",
        "tests",
        "tests/unit",
        "tests/integration",
    ]

    for dir_path in required_dirs:
        full_path = PROJECT_ROOT / dir_path
        assert full_path.exists(), f"Required directory missing: {dir_path}"
        assert full_path.is_dir(), f"Path exists but is not a directory: {dir_path}"


def test_python_package_init_files_exist():
    """Test that __init__.py files exist for Python packages."""
    required_init_files = [
        "core/__init__.py",
        "adapters/__init__.py",
        "tests/__init__.py",
        "tests/unit/__init__.py",
        "tests/integration/__init__.py",
    ]

    for init_file in required_init_files:
        full_path = PROJECT_ROOT / init_file
        assert full_path.is_file(), f"Required __init__.py missing: {init_file}"


def test_entry_point_and_manifest_exist():
    """Test that the CLI entry point, requirements and example config exist."""
    for name in ("main.py", "requirements.txt", "config/weights.example.toml"):
        assert (PROJECT_ROOT / name).is_file(), f"{name} missing"


def test_example_config_loads():
    """Test that the shipped example config parses into a valid WeightConfig."""
    from core.config import load_weight_config

    config = load_weight_config(PROJECT_ROOT / "config" / "weights.example.toml")
    assert abs(sum(config.weights.values()) - 1.0) < 1e-9
