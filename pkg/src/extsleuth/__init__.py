"""extsleuth: local analysis workbench for browser extensions, VS Code
extensions, and NPM packages."""

__version__ = "0.1.0"
