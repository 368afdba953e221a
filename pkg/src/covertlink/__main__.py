from covertlink.cli import main

main()
