from storbid.cli import main

main()
