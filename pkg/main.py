#!/usr/bin/python3
from kern_cli import start_cli


if __name__ == '__main__':
    start_cli()
