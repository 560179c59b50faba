from chshcert.cli import main

main()
