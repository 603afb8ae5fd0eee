from sr3_toolkit.cli import cli

if __name__ == "__main__":
    cli()
