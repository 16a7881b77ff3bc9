from xaidesk.cli import cli

cli(prog_name="xaidesk")
