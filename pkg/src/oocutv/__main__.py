from typer import Typer

from .cli import bench, dump_header, factor, generate, rank, solve, verify

app = Typer(context_settings={"help_option_names": ["-h", "--help"]}, no_args_is_help=True)

app.command("generate")(generate.main)
app.command("factor")(factor.main)
app.command("solve")(solve.main)
app.command("rank")(rank.main)
app.command("bench")(bench.main)
app.command("verify")(verify.main)
app.command("dump-header")(dump_header.main)


if __name__ == "__main__":
    app()
